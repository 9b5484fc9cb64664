from django.urls import include, path
from rest_framework.routers import DefaultRouter

from .views import CellRunViewSet, CycleRecordViewSet

router = DefaultRouter()
router.register(r'cell-runs', CellRunViewSet, basename='cell-run')
router.register(r'cycles', CycleRecordViewSet, basename='cycle')

urlpatterns = [
    path('', include(router.urls)),
]
