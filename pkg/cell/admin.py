from django.contrib import admin

from .models import CellRun, CycleRecord


class CycleRecordInline(admin.TabularInline):
    model = CycleRecord
    extra = 0


@admin.register(CellRun)
class CellRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'scene_name', 'seed', 'backend_kind', 'model_name', 'cycles', 'shutdown_reason', 'created_at')
    list_filter = ('backend_kind', 'model_name')
    inlines = [CycleRecordInline]


admin.site.register(CycleRecord)
