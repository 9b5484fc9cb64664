from django.db import models

from .cellsim import GarmentClass


class CellRun(models.Model):
    """
    One recorded sorting run. Files in the output directory stay the primary
    artefact; this row makes runs browsable through the API and the admin.
    """
    BACKEND_CHOICES = [
        ('mock', 'Mock profile'),
        ('live', 'Live chat server'),
        ('replay', 'Replay log'),
    ]

    seed = models.BigIntegerField()
    scene_name = models.CharField(max_length=100, blank=True)
    backend_kind = models.CharField(max_length=10, choices=BACKEND_CHOICES)
    model_name = models.CharField(max_length=100)
    item_count = models.PositiveIntegerField()
    cycles = models.PositiveIntegerField(default=0)
    candidate_requests = models.PositiveIntegerField(default=0)
    transitions = models.PositiveIntegerField(default=0)
    shutdown_reason = models.CharField(max_length=200, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.scene_name or 'scene'} seed={self.seed} ({self.cycles} cycles)"


class CycleRecord(models.Model):
    run = models.ForeignKey(CellRun, on_delete=models.CASCADE, related_name='cycle_records')
    index = models.PositiveIntegerField()
    item_id = models.CharField(max_length=40)
    true_class = models.CharField(max_length=10, choices=GarmentClass.choices)
    # "sock" or "invalid:multi_word"; blank when the run stopped before classification.
    predicted = models.CharField(max_length=40, blank=True)
    destination_bin = models.CharField(max_length=10, choices=GarmentClass.choices)
    candidate_retries = models.PositiveIntegerField(default=0)
    pick_retries = models.PositiveIntegerField(default=0)

    class Meta:
        ordering = ['run', 'index']
        constraints = [
            models.UniqueConstraint(fields=['run', 'index'], name='unique_cycle_per_run'),
        ]

    def __str__(self):
        return f'{self.item_id} -> {self.destination_bin}'
