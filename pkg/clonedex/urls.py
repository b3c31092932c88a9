# URL configuration for the clone query API
from django.urls import path
from . import views

app_name = 'clonedex'

urlpatterns = [
    # Health check
    path('health/', views.HealthCheckView.as_view(), name='health_check'),

    # Index
    path('index/status/', views.IndexStatusView.as_view(), name='index_status'),

    # Clone queries
    path('clones/', views.CloneQueryView.as_view(), name='clone_query'),
]
