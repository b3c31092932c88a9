import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
django.setup()


def pytest_configure(config):
    # Mirror Django's test runner (python manage.py test) environment.
    from django.test.utils import setup_test_environment
    setup_test_environment()
