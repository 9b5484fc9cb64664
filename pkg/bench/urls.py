from django.urls import include, path
from rest_framework.routers import DefaultRouter

from .views import BenchmarkRunViewSet, ResponseRecordViewSet

router = DefaultRouter()
router.register(r'benchmarks', BenchmarkRunViewSet, basename='benchmark')
router.register(r'responses', ResponseRecordViewSet, basename='response')

urlpatterns = [
    path('', include(router.urls)),
]
