from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from cell.cellsim import default_layout
from cell.exceptions import CellError
from cell.frames import load_frame
from cell.segmentation import (
    SegThresholds, capture_baseline, export_cloud, load_baseline, save_baseline,
    segment,
)


class Command(BaseCommand):
    help = 'Segments inspection table frames against an empty-table baseline and writes PLY clouds'

    def add_arguments(self, parser):
        parser.add_argument('frames', nargs='+', help='frame stems (<stem>.png, <stem>.pgm, <stem>.json)')
        parser.add_argument('--baseline', required=True, help='baseline directory')
        parser.add_argument('--make-baseline', action='store_true',
                            help='build the baseline from the given empty-table frames instead')
        parser.add_argument('--depth-mm', type=float, default=settings.SORTCELL['DEPTH_DELTA_MM'],
                            help='depth change threshold in mm (strict)')
        parser.add_argument('--rgb', type=int, default=settings.SORTCELL['RGB_DELTA'],
                            help='per-channel colour change threshold (strict)')
        parser.add_argument('--out', default='.', help='directory for the PLY files')

    def handle(self, *args, **options):
        try:
            if options['make_baseline']:
                self._make_baseline(options)
            else:
                self._segment(options)
        except (CellError, FileNotFoundError) as exc:
            raise CommandError(str(exc)) from exc

    def _make_baseline(self, options):
        frames = [load_frame(stem) for stem in options['frames']]
        baseline = capture_baseline(frames)
        save_baseline(baseline, options['baseline'], frames[0].table_depth_mm)
        self.stdout.write(self.style.SUCCESS(
            f"Baseline from {baseline.frame_count_used} frames written to {options['baseline']}"
        ))

    def _segment(self, options):
        thresholds = SegThresholds(options['depth_mm'], options['rgb'])
        baseline = load_baseline(options['baseline'])
        cameras = default_layout().cameras
        out_dir = Path(options['out'])
        for stem in options['frames']:
            frame = load_frame(stem)
            try:
                camera = cameras[frame.camera_id]
            except KeyError:
                raise CommandError(f'{stem}: unknown camera {frame.camera_id!r}') from None
            cloud = segment(frame, baseline, thresholds, camera)
            path = export_cloud(cloud, out_dir / f'{Path(stem).name}.ply')
            self.stdout.write(f'{path}: {len(cloud)} points')
        self.stdout.write(self.style.SUCCESS(f"Segmented {len(options['frames'])} frames"))
