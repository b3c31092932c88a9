"""
URL configuration for the clonedex project.

Only the read-only query API is exposed; everything else runs through
management commands.
"""
from django.urls import path, include

urlpatterns = [
    path('api/', include('clonedex.urls')),
]
