from rest_framework import permissions, viewsets
from rest_framework.filters import OrderingFilter

from django_filters.rest_framework import DjangoFilterBackend

from .models import BenchmarkRun, ResponseRecord
from .serializers import BenchmarkRunSerializer, ResponseRecordSerializer


class BenchmarkRunViewSet(viewsets.ReadOnlyModelViewSet):
    queryset = BenchmarkRun.objects.all()
    serializer_class = BenchmarkRunSerializer
    permission_classes = [permissions.AllowAny]
    filter_backends = [DjangoFilterBackend, OrderingFilter]
    filterset_fields = ['model_name', 'hardware', 'backend_kind']
    ordering_fields = ['created_at', 'overall_accuracy']


class ResponseRecordViewSet(viewsets.ReadOnlyModelViewSet):
    queryset = ResponseRecord.objects.select_related('run')
    serializer_class = ResponseRecordSerializer
    permission_classes = [permissions.AllowAny]
    filter_backends = [DjangoFilterBackend]
    filterset_fields = ['run', 'ground_truth', 'parsed']
