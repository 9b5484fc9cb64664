from django.db import transaction

from .evaluation import answered_latencies
from .metrics import confusion_matrix, overall_accuracy
from .models import BenchmarkRun, ResponseRecord


@transaction.atomic
def record_benchmark(log, dataset, backend_kind='', hardware='', failed_calls=0, output_dir=''):
    matrix = confusion_matrix(log, dataset)
    latencies = answered_latencies(log)
    run = BenchmarkRun.objects.create(
        model_name=log.model_name,
        hardware=hardware or '',
        backend_kind=backend_kind or '',
        dataset_size=len(dataset),
        overall_accuracy=float(overall_accuracy(matrix)) if matrix.total else None,
        failed_calls=failed_calls,
        mean_latency_s=sum(latencies) / len(latencies) if latencies else None,
        output_dir=str(output_dir or ''),
    )
    ResponseRecord.objects.bulk_create([
        ResponseRecord(
            run=run,
            record_id=response.id,
            ground_truth=record.ground_truth.value,
            raw=response.raw,
            parsed=str(response.parsed),
            latency_s=response.latency_s,
        )
        for record, response in zip(dataset, log.covering(dataset))
    ])
    return run
