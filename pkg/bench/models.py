from django.db import models

from cell.cellsim import GarmentClass


class BenchmarkRun(models.Model):
    model_name = models.CharField(max_length=100)
    hardware = models.CharField(max_length=50, blank=True)
    backend_kind = models.CharField(max_length=10, blank=True)
    dataset_size = models.PositiveIntegerField()
    overall_accuracy = models.FloatField(null=True, blank=True)
    failed_calls = models.PositiveIntegerField(default=0)
    mean_latency_s = models.FloatField(null=True, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f'{self.model_name} on {self.dataset_size} images'


class ResponseRecord(models.Model):
    run = models.ForeignKey(BenchmarkRun, on_delete=models.CASCADE, related_name='responses')
    record_id = models.CharField(max_length=100)
    ground_truth = models.CharField(max_length=10, choices=GarmentClass.choices)
    raw = models.TextField(blank=True)
    # "sock" or "invalid:multi_word"
    parsed = models.CharField(max_length=40)
    latency_s = models.FloatField()

    class Meta:
        ordering = ['run', 'id']
        constraints = [
            models.UniqueConstraint(fields=['run', 'record_id'], name='unique_response_per_run'),
        ]

    def __str__(self):
        return f'{self.record_id}: {self.parsed}'
