from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from bench.evaluation import answered_latencies, evaluate
from bench.exceptions import BenchError
from bench.logs import read_log, write_log
from bench.manifest import class_counts, load_manifest
from bench.metrics import (
    EnsembleSpec, audit_table, confusion_matrix, ensemble_vote, overall_accuracy,
    timing_stats,
)
from bench.reference import ACCURACY_TABLE, CLASS_COUNTS, IMAGE_COUNT, count_discrepancy
from bench.reports import ModelReport, emit_report, model_slug
from bench.serializers import EnsembleRequestSerializer
from bench.services import record_benchmark
from cell.config import load_document, resolve_backend_descriptor
from cell.exceptions import CellError
from classify.backends import build_backend
from classify.exceptions import ClassifierError


class Command(BaseCommand):
    help = 'Evaluates a classifier backend on a dataset manifest and writes the response log and reports'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='config document (JSON or TOML) with `backend` and `bench` sections')
        parser.add_argument('--manifest', help='dataset manifest (JSON lines: id, image, label)')
        parser.add_argument('--backend', choices=['mock', 'live', 'replay'], help='classifier backend')
        parser.add_argument('--endpoint', help='live model server URL (default: SORTCELL_ENDPOINT)')
        parser.add_argument('--timeout-s', type=float, help='classifier timeout in seconds')
        parser.add_argument('--model', help='model name')
        parser.add_argument('--profile', help='confusion profile for the mock backend')
        parser.add_argument('--replay-log', help='response log for the replay backend')
        parser.add_argument('--seed', type=int, help='seed of the mock backend')
        parser.add_argument('--concurrency', type=int, help='parallel classifier calls (default 1)')
        parser.add_argument('--out', default='bench_out', help='output directory')
        parser.add_argument('--report', action='store_true', help='also write the accuracy, timing and confusion reports')
        parser.add_argument('--ensemble', help='weighted vote over member logs, e.g. "a=0.3,b=0.4,c=0.3"')
        parser.add_argument('--member-log', action='append', default=[], help='response log of an ensemble member (repeatable)')
        parser.add_argument('--lenient-punctuation', action='store_true', default=None,
                            help='strip trailing punctuation before scoring answers')
        parser.add_argument('--hardware', help='free-form hardware tag stored with every response')
        parser.add_argument('--audit-reference', action='store_true',
                            help='audit the published accuracy table for internal consistency')
        parser.add_argument('--record', action='store_true', help='also store the benchmark in the database')

    def handle(self, *args, **options):
        out_dir = Path(options['out'])
        try:
            document = load_document(options['config']) if options.get('config') else {}
            bench_options = document.get('bench', {})
            if options['audit_reference']:
                self._audit_reference(out_dir)
                if not options.get('manifest'):
                    return
            if not options.get('manifest'):
                raise CommandError('--manifest is required')
            dataset = load_manifest(options['manifest'])
            self.stdout.write(f"Loaded {len(dataset)} records from {options['manifest']}")

            if options.get('ensemble'):
                log, members = self._ensemble(options, dataset)
                errors, kind = [], 'ensemble'
            else:
                log, errors, kind = self._evaluate(options, document, bench_options, dataset)
                members = []

            path = write_log(log, out_dir / f'responses_{model_slug(log.model_name)}.jsonl')
            self.stdout.write(f'Response log written to {path}')
            matrix = confusion_matrix(log, dataset)
            if matrix.total:
                self.stdout.write(f'{log.model_name}: overall accuracy {100 * float(overall_accuracy(matrix)):.2f}%')

            if options['report']:
                reports = [self._model_report(member, dataset, bench_options) for member in members]
                reports.append(self._model_report(log, dataset, bench_options, options.get('hardware')))
                audit = {'class_counts': class_counts(dataset)}
                emit_report(reports, out_dir, audit=audit)
                self.stdout.write(f'Reports written to {out_dir}')
            if options['record']:
                run = record_benchmark(
                    log, dataset, backend_kind=kind, hardware=options.get('hardware') or '',
                    failed_calls=len(errors), output_dir=out_dir,
                )
                self.stdout.write(f'Recorded benchmark #{run.pk}')
        except (BenchError, ClassifierError, CellError) as exc:
            raise CommandError(str(exc)) from exc

        if errors:
            for record_id, reason, message in errors:
                self.stderr.write(f'{record_id}: {reason}: {message}')
            raise CommandError(f'{len(errors)} of {len(dataset)} classifier calls failed')
        self.stdout.write(self.style.SUCCESS(f'Benchmark of {log.model_name} finished'))

    def _evaluate(self, options, document, bench_options, dataset):
        flags = {
            'kind': options.get('backend'),
            'endpoint': options.get('endpoint'),
            'timeout_s': options.get('timeout_s'),
            'model_name': options.get('model'),
            'profile_path': options.get('profile'),
            'log_path': options.get('replay_log'),
        }
        seed = options['seed'] if options.get('seed') is not None else document.get('seed', 0)
        descriptor = resolve_backend_descriptor(document.get('backend'), flags, seed=seed)
        backend = build_backend(descriptor)
        concurrency = options.get('concurrency') or bench_options.get('concurrency', 1)
        lenient = options['lenient_punctuation']
        if lenient is None:
            lenient = bench_options.get('lenient_punctuation', False)
        result = evaluate(
            backend, dataset,
            concurrency=concurrency,
            lenient_punctuation=lenient,
            hardware=options.get('hardware') or bench_options.get('hardware'),
        )
        if result.errors:
            self.stderr.write(f'Failed calls: {result.error_summary()}')
        return result.log, result.errors, descriptor.kind

    def _ensemble(self, options, dataset):
        request = EnsembleRequestSerializer(data={
            'ensemble': options['ensemble'],
            'member_logs': options['member_log'],
        })
        if not request.is_valid():
            raise CommandError(
                'usage: --ensemble "model_a=0.3,model_b=0.7" --member-log A.jsonl --member-log B.jsonl '
                f'({request.errors})'
            )
        spec = EnsembleSpec.parse(request.validated_data['ensemble'])
        logs = [read_log(path) for path in request.validated_data['member_logs']]
        return ensemble_vote(logs, spec, dataset), logs

    def _model_report(self, log, dataset, bench_options, hardware=None):
        latencies = answered_latencies(log)
        hardware = hardware or bench_options.get('hardware') or next((r.hardware for r in log if r.hardware), None)
        return ModelReport(
            model_name=log.model_name,
            matrix=confusion_matrix(log, dataset),
            stats=timing_stats(latencies) if latencies else None,
            hardware=hardware,
        )

    def _audit_reference(self, out_dir):
        findings = audit_table(ACCURACY_TABLE, CLASS_COUNTS, total=IMAGE_COUNT)
        audit = {
            'counts': count_discrepancy(),
            'rows': [finding.to_document() for finding in findings],
        }
        emit_report([], out_dir, formats=(), audit=audit)
        for finding in findings:
            if finding.flagged:
                self.stdout.write(self.style.WARNING(
                    f'{finding.model}: per-class accuracies give {finding.back_computed} correct, '
                    f'overall accuracy gives {finding.expected} of {finding.total}'
                ))
        discrepancy = count_discrepancy()
        if discrepancy['sum_of_class_counts'] != discrepancy['image_count']:
            self.stdout.write(self.style.WARNING(
                f"class counts add up to {discrepancy['sum_of_class_counts']}, "
                f"the image count is {discrepancy['image_count']}"
            ))
        self.stdout.write(f'Audit written to {out_dir / "audit.json"}')
