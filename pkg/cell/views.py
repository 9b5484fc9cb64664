from rest_framework import permissions, viewsets
from rest_framework.filters import OrderingFilter

from django_filters.rest_framework import DjangoFilterBackend

from .models import CellRun, CycleRecord
from .serializers import CellRunSerializer, CycleRecordSerializer


class CellRunViewSet(viewsets.ReadOnlyModelViewSet):
    queryset = CellRun.objects.prefetch_related('cycle_records')
    serializer_class = CellRunSerializer
    permission_classes = [permissions.AllowAny]
    filter_backends = [DjangoFilterBackend, OrderingFilter]
    filterset_fields = ['seed', 'scene_name', 'backend_kind', 'model_name']
    ordering_fields = ['created_at', 'cycles']


class CycleRecordViewSet(viewsets.ReadOnlyModelViewSet):
    queryset = CycleRecord.objects.select_related('run')
    serializer_class = CycleRecordSerializer
    permission_classes = [permissions.AllowAny]
    filter_backends = [DjangoFilterBackend]
    filterset_fields = ['run', 'true_class', 'destination_bin']
