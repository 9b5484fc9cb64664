'''
Background subtraction on the inspection table. A baseline is taken from
frames of the empty table; later frames are compared against it per pixel
and every changed pixel is back-projected into a coloured world point. Clouds
are written as ASCII PLY for the digital twin.
'''
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cellsim import RgbdFrame
from .exceptions import BaselineError, ConfigError, FrameMismatchError
from .frames import load_frame, save_frame

logger = logging.getLogger(__name__)

BASELINE_STEM = 'baseline'

PLY_HEADER = (
    'ply\n'
    'format ascii 1.0\n'
    'element vertex {count}\n'
    'property float x\n'
    'property float y\n'
    'property float z\n'
    'property uchar red\n'
    'property uchar green\n'
    'property uchar blue\n'
    'end_header\n'
)


@dataclass(eq=False)
class SegBaseline:
    camera_id: str
    baseline_rgb: np.ndarray
    baseline_depth_mm: np.ndarray
    frame_count_used: int

    def __post_init__(self):
        if self.frame_count_used < 1:
            raise BaselineError('a baseline needs at least one frame')
        if self.baseline_rgb.shape[:2] != self.baseline_depth_mm.shape:
            raise FrameMismatchError('baseline colour and depth rasters differ in size')

    @property
    def shape(self):
        return self.baseline_depth_mm.shape


@dataclass(frozen=True)
class SegThresholds:
    depth_delta_mm: float = 5.0
    rgb_delta: int = 15

    def __post_init__(self):
        if not (self.depth_delta_mm > 0 and self.rgb_delta > 0):
            raise ConfigError('segmentation thresholds must be strictly positive')


@dataclass(eq=False)
class ColoredPointCloud:
    """World points in millimetres with 8-bit colour, row-major over the source pixels."""
    xyz: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    rgb: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.uint8))
    source_tick: int = 0
    pixels: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __len__(self):
        return len(self.xyz)

    @property
    def points(self):
        return [tuple(p) + tuple(int(c) for c in color) for p, color in zip(self.xyz.tolist(), self.rgb)]


def _lower_median(stack):
    ordered = np.sort(stack, axis=0)
    return ordered[(len(stack) - 1) // 2]


def capture_baseline(frames):
    if not frames:
        raise BaselineError('no frames given for the baseline')
    cameras = {frame.camera_id for frame in frames}
    if len(cameras) > 1:
        raise BaselineError(f'baseline frames come from several cameras: {sorted(cameras)}')
    shapes = {frame.depth_mm.shape for frame in frames}
    if len(shapes) > 1:
        raise FrameMismatchError(f'baseline frames differ in size: {sorted(shapes)}')
    return SegBaseline(
        camera_id=frames[0].camera_id,
        baseline_rgb=_lower_median(np.stack([frame.rgb for frame in frames])),
        baseline_depth_mm=_lower_median(np.stack([frame.depth_mm for frame in frames])),
        frame_count_used=len(frames),
    )


def foreground_mask(frame, baseline, thr):
    if frame.depth_mm.shape != baseline.shape:
        raise FrameMismatchError(f'frame {frame.depth_mm.shape} does not match baseline {baseline.shape}')
    depth_changed = np.abs(frame.depth_mm - baseline.baseline_depth_mm) > thr.depth_delta_mm
    color_delta = np.abs(frame.rgb.astype(np.int16) - baseline.baseline_rgb.astype(np.int16))
    return depth_changed | np.any(color_delta > thr.rgb_delta, axis=2)


def segment(frame, baseline, thr, camera):
    mask = foreground_mask(frame, baseline, thr)
    vs, us = np.nonzero(mask)
    xyz = camera.to_world(us, vs, frame.depth_mm[vs, us]).reshape(-1, 3)
    logger.debug('segmented %d foreground pixels on %s', len(us), frame.camera_id)
    return ColoredPointCloud(
        xyz=xyz,
        rgb=frame.rgb[vs, us].reshape(-1, 3),
        source_tick=frame.timestamp,
        pixels=np.stack([us, vs], axis=1),
    )


def _format_float(value):
    return np.format_float_positional(np.float32(value), trim='-')


def export_cloud(cloud, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [PLY_HEADER.format(count=len(cloud))]
    for (x, y, z), (r, g, b) in zip(cloud.xyz.tolist(), cloud.rgb.tolist()):
        lines.append(f'{_format_float(x)} {_format_float(y)} {_format_float(z)} {r} {g} {b}\n')
    path.write_text(''.join(lines))
    return path


def read_cloud(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != 'ply':
        raise ValueError(f'{path} is not a PLY file')
    count = None
    body_start = None
    for index, line in enumerate(lines):
        if line.startswith('element vertex'):
            count = int(line.split()[2])
        if line == 'end_header':
            body_start = index + 1
            break
    if count is None or body_start is None:
        raise ValueError(f'{path}: incomplete PLY header')
    rows = [line.split() for line in lines[body_start:body_start + count]]
    if len(rows) != count:
        raise ValueError(f'{path}: expected {count} vertices, found {len(rows)}')
    xyz = np.array([[float(v) for v in row[:3]] for row in rows], dtype=np.float64).reshape(-1, 3)
    rgb = np.array([[int(v) for v in row[3:6]] for row in rows], dtype=np.uint8).reshape(-1, 3)
    return ColoredPointCloud(xyz=xyz, rgb=rgb)


def save_baseline(baseline, directory, table_depth_mm):
    directory = Path(directory)
    frame = RgbdFrame(
        camera_id=baseline.camera_id,
        rgb=baseline.baseline_rgb,
        depth_mm=baseline.baseline_depth_mm,
        timestamp=0,
        table_depth_mm=table_depth_mm,
    )
    save_frame(frame, directory / BASELINE_STEM)
    meta_path = directory / f'{BASELINE_STEM}.json'
    meta = json.loads(meta_path.read_text())
    meta['frame_count_used'] = baseline.frame_count_used
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2))
    return directory


def load_baseline(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise BaselineError(f'baseline directory {directory} does not exist')
    try:
        frame = load_frame(directory / BASELINE_STEM)
    except FileNotFoundError as exc:
        raise BaselineError(str(exc)) from exc
    meta_path = directory / f'{BASELINE_STEM}.json'
    count = json.loads(meta_path.read_text()).get('frame_count_used', 1) if meta_path.exists() else 1
    return SegBaseline(
        camera_id=frame.camera_id,
        baseline_rgb=frame.rgb,
        baseline_depth_mm=frame.depth_mm,
        frame_count_used=count,
    )
