from django.apps import AppConfig
import logging

logger = logging.getLogger(__name__)


class ClonedexConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'clonedex'
    verbose_name = 'Clone detection'

    def ready(self):
        """
        Load language tables once Django starts
        """
        from .languages import language_registry
        logger.debug(f"Language tables available: {', '.join(language_registry.names())}")
