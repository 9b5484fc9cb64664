from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from classify.exceptions import ClassifierError
from cell.config import load_document, resolve_run_config
from cell.exceptions import CellError
from cell.runner import run_until_empty
from cell.services import record_run


class Command(BaseCommand):
    help = 'Runs the simulated sorting cell until the basket is empty'

    def add_arguments(self, parser):
        subcommands = parser.add_subparsers(dest='subcommand', required=True)
        run = subcommands.add_parser('run', help='sort one simulated scene from spawn to shutdown')
        run.add_argument('--config', help='run config document (JSON or TOML)')
        run.add_argument('--seed', type=int, help='seed for the scene and every random draw')
        run.add_argument('--scene', help='scene file (JSON)')
        run.add_argument('--backend', choices=['mock', 'live', 'replay'], help='classifier backend')
        run.add_argument('--endpoint', help='live model server URL (default: SORTCELL_ENDPOINT)')
        run.add_argument('--timeout-s', type=float, help='classifier timeout in seconds')
        run.add_argument('--model', help='model name sent to the classifier')
        run.add_argument('--profile', help='confusion profile for the mock backend')
        run.add_argument('--replay-log', help='response log for the replay backend')
        run.add_argument('--failure-rate', type=float, help='probability that a pick closes on nothing')
        run.add_argument('--pick-budget', type=int, help='pick retries in the basket before shutdown')
        run.add_argument('--spread-factor', type=float, help='footprint growth when spreading on the table')
        run.add_argument('--depth-mm', type=float, help='segmentation depth threshold in mm')
        run.add_argument('--rgb', type=int, help='segmentation colour threshold')
        run.add_argument('--lenient-punctuation', action='store_true', default=None,
                         help='strip trailing punctuation before scoring answers')
        run.add_argument('--out', help='output directory')
        run.add_argument('--record', action='store_true', help='also store the run in the database')

    def handle(self, *args, **options):
        try:
            config = resolve_run_config(
                load_document(options['config']) if options.get('config') else None,
                self._flags(options),
            )
            result = run_until_empty(config, out_dir=config.out)
        except (CellError, ClassifierError) as exc:
            raise CommandError(str(exc)) from exc

        if options.get('record'):
            run = record_run(result, config, config.out)
            self.stdout.write(f'Recorded run #{run.pk}')
        for cycle in result.cycles:
            self.stdout.write(
                f'{cycle.item_id}  {cycle.true_class:<10} -> {cycle.destination_bin:<10} '
                f'({cycle.predicted})'
            )
        self.stdout.write(self.style.SUCCESS(
            f'Sorted {len(result.cycles)} items in {len(result.records)} transitions '
            f'({result.candidate_requests} candidate requests): {result.shutdown_reason}'
        ))
        if config.out:
            self.stdout.write(f'Outputs written to {Path(config.out)}')

    def _flags(self, options):
        backend = {
            'kind': options.get('backend'),
            'endpoint': options.get('endpoint'),
            'timeout_s': options.get('timeout_s'),
            'model_name': options.get('model'),
            'profile_path': options.get('profile'),
            'log_path': options.get('replay_log'),
        }
        return {
            'seed': options.get('seed'),
            'scene': options.get('scene'),
            'backend': backend,
            'thresholds': {'depth_delta_mm': options.get('depth_mm'), 'rgb_delta': options.get('rgb')},
            'pick_failure_rate': options.get('failure_rate'),
            'pick_budget': options.get('pick_budget'),
            'spread_factor': options.get('spread_factor'),
            'classify_timeout_s': options.get('timeout_s'),
            'lenient_punctuation': options.get('lenient_punctuation'),
            'out': options.get('out'),
        }
