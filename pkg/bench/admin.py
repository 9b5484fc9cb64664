from django.contrib import admin

from .models import BenchmarkRun, ResponseRecord


@admin.register(BenchmarkRun)
class BenchmarkRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'model_name', 'hardware', 'dataset_size', 'overall_accuracy', 'failed_calls', 'created_at')
    list_filter = ('model_name', 'hardware')


@admin.register(ResponseRecord)
class ResponseRecordAdmin(admin.ModelAdmin):
    list_display = ('record_id', 'run', 'ground_truth', 'parsed', 'latency_s')
    list_filter = ('ground_truth', 'parsed')
    search_fields = ('record_id', 'raw')
