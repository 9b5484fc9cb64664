'''
Persisting runs. Recording is opt-in from the command line; the run's output
files are written either way.
'''
from django.db import transaction

from .models import CellRun, CycleRecord


@transaction.atomic
def record_run(result, config, output_dir=''):
    run = CellRun.objects.create(
        seed=config.seed,
        scene_name=config.scene.name,
        backend_kind=config.backend.kind,
        model_name=config.backend.model_name,
        item_count=len(result.world.items),
        cycles=len(result.cycles),
        candidate_requests=result.candidate_requests,
        transitions=len(result.records),
        shutdown_reason=result.shutdown_reason,
        output_dir=str(output_dir or ''),
    )
    CycleRecord.objects.bulk_create([
        CycleRecord(
            run=run,
            index=index,
            item_id=cycle.item_id,
            true_class=cycle.true_class,
            predicted=str(cycle.predicted) if cycle.predicted is not None else '',
            destination_bin=cycle.destination_bin,
            candidate_retries=cycle.candidate_retries,
            pick_retries=cycle.pick_retries,
        )
        for index, cycle in enumerate(result.cycles)
    ])
    return run
