from rest_framework import serializers

from .models import BenchmarkRun, ResponseRecord


class ResponseRecordSerializer(serializers.ModelSerializer):
    class Meta:
        model = ResponseRecord
        fields = ['id', 'run', 'record_id', 'ground_truth', 'raw', 'parsed', 'latency_s']


class BenchmarkRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = BenchmarkRun
        fields = [
            'id', 'model_name', 'hardware', 'backend_kind', 'dataset_size',
            'overall_accuracy', 'failed_calls', 'mean_latency_s', 'output_dir',
            'created_at',
        ]


class EnsembleRequestSerializer(serializers.Serializer):
    """Validates the `--ensemble` and `--member-log` pair of the bench command."""
    ensemble = serializers.CharField()
    member_logs = serializers.ListField(child=serializers.CharField(), min_length=1)
