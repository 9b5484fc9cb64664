'''
Grasping for robot Alice: candidate prediction on RGB-D frames, the retry
budget around the predictor, pinhole back-projection, a straight-line
reachability check against the twin's obstacle boxes, pick execution in the
simulated world and tactile grasp verification.

The predictor is a height-prominence heuristic: it picks the connected
region with the highest peak and grasps at the centroid of that region. It
stands in for a learned grasp network; only the contract
(candidate or none, pixel plus world pose) matters to the cell.
'''
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .cellsim import GRIPPED, ZoneId, pixel_cells
from .exceptions import ChannelMismatchError, ConfigError, NoGraspedItemError

logger = logging.getLogger(__name__)

DEFAULT_CANDIDATE_ATTEMPTS = 5


@dataclass(frozen=True)
class GraspCandidate:
    pixel: tuple
    depth_mm: float
    world_pose: tuple
    yaw: float
    score: float
    camera_id: str

    def to_document(self):
        return {
            'pixel': list(self.pixel),
            'depth_mm': self.depth_mm,
            'world_pose': list(self.world_pose),
            'yaw': self.yaw,
            'score': self.score,
        }


@dataclass(frozen=True)
class RobotModel:
    robot_id: str
    base_position: tuple
    reach_min_mm: float
    reach_max_mm: float
    pick_failure_rate: float = 0.0

    def __post_init__(self):
        if not 0 <= self.reach_min_mm < self.reach_max_mm:
            raise ConfigError(f'{self.robot_id}: reach band must satisfy 0 <= min < max')
        if not 0.0 <= self.pick_failure_rate <= 1.0:
            raise ConfigError(f'{self.robot_id}: pick failure rate must lie in [0, 1]')


def default_robots(pick_failure_rate=0.0):
    """Alice serves zones A and B, Bob stands 1.4 m away behind the bins."""
    return {
        'Alice': RobotModel('Alice', (450.0, -450.0, 0.0), 150.0, 1900.0, pick_failure_rate),
        'Bob': RobotModel('Bob', (450.0, 950.0, 0.0), 150.0, 1900.0, pick_failure_rate),
    }


@dataclass(frozen=True)
class TactileBaseline:
    normal: tuple
    shear: tuple

    def __post_init__(self):
        if len(self.normal) < 1 or len(self.normal) != len(self.shear):
            raise ChannelMismatchError('baseline needs at least one channel and equal normal/shear counts')
        if not all(math.isfinite(v) for v in self.normal + self.shear):
            raise ConfigError('baseline values must be finite')

    @property
    def channels(self):
        return len(self.normal)


@dataclass(frozen=True)
class TactileReading:
    normal: tuple
    shear: tuple

    def __post_init__(self):
        if len(self.normal) != len(self.shear):
            raise ChannelMismatchError('normal and shear channel counts differ')
        if not all(math.isfinite(v) for v in self.normal + self.shear):
            raise ConfigError('tactile readings must be finite')

    @property
    def channels(self):
        return len(self.normal)


class TactileSensor:
    '''
    Simulated capacitive fingertips. Force delta is linear in the thickness of
    the grasped material; with nothing grasped the spacers keep the fingers
    apart and the reading stays at the offsets.
    '''

    def __init__(self, channels=4, gain=0.5, seed=0, noise=None):
        if channels < 1:
            raise ConfigError('tactile sensor needs at least one channel')
        rng = np.random.default_rng(seed)
        self.channels = channels
        self.gain = gain
        self.noise = noise
        self._normal_offsets = tuple(float(v) for v in rng.uniform(0.2, 0.6, channels))
        self._shear_offsets = tuple(float(v) for v in rng.uniform(-0.05, 0.05, channels))

    def record_baseline(self):
        return TactileBaseline(self._normal_offsets, self._shear_offsets)

    def read(self, thickness_mm=None):
        delta = self.gain * thickness_mm if thickness_mm else 0.0
        normal = tuple(v + delta for v in self._normal_offsets)
        shear = tuple(v + 0.1 * delta for v in self._shear_offsets)
        if self.noise is not None:
            normal, shear = self.noise(normal, shear)
        return TactileReading(normal, shear)


@dataclass(frozen=True)
class PickOutcome:
    grasped_item: Optional[str]
    reading: TactileReading
    bycatch: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.grasped_item is None and self.bycatch:
            raise ConfigError('bycatch without a grasped item')
        if self.grasped_item in self.bycatch:
            raise ConfigError('the grasped item cannot be its own bycatch')


def pixel_to_world(pixel, depth_mm, camera):
    if depth_mm <= 0:
        raise ConfigError('depth must be positive')
    return camera.to_world(pixel[0], pixel[1], depth_mm)


def world_to_pixel(point, camera):
    u, v, _ = camera.to_pixel(point)
    return (float(u), float(v))


def _region_yaw(us, vs):
    du = us - us.mean()
    dv = vs - vs.mean()
    mu20, mu02, mu11 = (du * du).mean(), (dv * dv).mean(), (du * dv).mean()
    # Image v runs against world y, hence the sign flip.
    return -0.5 * math.atan2(2.0 * mu11, mu20 - mu02)


def predict_grasp(frame, roi, camera, min_height_mm=5.0, score_norm_mm=100.0):
    heights = frame.table_depth_mm - frame.depth_mm
    mask = roi.mask(frame.height, frame.width) & (heights > min_height_mm)
    if not mask.any():
        return None

    labels, count = ndimage.label(mask)
    index = np.arange(1, count + 1)
    peaks = np.asarray(ndimage.maximum(heights, labels, index), dtype=np.float64)
    sizes = np.asarray(ndimage.sum(mask, labels, index), dtype=np.float64)
    best = max(index, key=lambda label: (peaks[label - 1], sizes[label - 1], -label))
    region = labels == best
    peak = peaks[best - 1]

    vs, us = np.nonzero(region)
    center_v, center_u = ndimage.center_of_mass(region)
    u, v = int(np.rint(center_u)), int(np.rint(center_v))
    if not region[v, u]:
        # Concave footprint: the nearest pixel of the region.
        nearest = int(np.argmin((us - center_u) ** 2 + (vs - center_v) ** 2))
        u, v = int(us[nearest]), int(vs[nearest])

    depth = float(frame.depth_mm[v, u])
    world = pixel_to_world((u, v), depth, camera)
    return GraspCandidate(
        pixel=(u, v),
        depth_mm=depth,
        world_pose=tuple(float(c) for c in world),
        yaw=_region_yaw(us.astype(np.float64), vs.astype(np.float64)),
        score=float(min(max(peak / score_norm_mm, 0.0), 1.0)),
        camera_id=frame.camera_id,
    )


class GraspPredictor:
    """predict_grasp bound to the cell's cameras; the handler behind the grasp service."""

    def __init__(self, cameras, min_height_mm=5.0, score_norm_mm=100.0):
        self.cameras = cameras
        self.min_height_mm = min_height_mm
        self.score_norm_mm = score_norm_mm

    def __call__(self, frame, roi):
        return predict_grasp(
            frame, roi, self.cameras[frame.camera_id],
            min_height_mm=self.min_height_mm,
            score_norm_mm=self.score_norm_mm,
        )


def request_candidate_with_retry(predict, max_total_attempts=DEFAULT_CANDIDATE_ATTEMPTS):
    if max_total_attempts < 1:
        raise ConfigError('max_total_attempts must be at least 1')
    for attempt in range(1, max_total_attempts + 1):
        candidate = predict()
        if candidate is not None:
            return candidate
        logger.debug('no grasp candidate on attempt %d/%d', attempt, max_total_attempts)
    return None


def check_reachability(pose, robot, obstacles, step_mm=1.0):
    target = np.asarray(pose[:3], dtype=np.float64)
    base = np.asarray(robot.base_position, dtype=np.float64)
    distance = float(np.linalg.norm(target - base))
    if not robot.reach_min_mm <= distance <= robot.reach_max_mm:
        return False
    steps = max(int(math.ceil(distance / step_mm)), 1)
    samples = base + np.linspace(0.0, 1.0, steps + 1)[:, None] * (target - base)
    for box in obstacles:
        inside = np.all((samples >= np.asarray(box.min_xyz)) & (samples <= np.asarray(box.max_xyz)), axis=1)
        if inside.any():
            return False
    return True


def _item_under_pixel(world, candidate, zones):
    camera = world.layout.cameras[candidate.camera_id]
    u, v = candidate.pixel
    cell = pixel_cells(camera, world.layout.cell_mm)[v, u]
    x, y = (cell + 0.5) * world.layout.cell_mm
    return world.topmost_at(x, y, zones)


def execute_pick(world, robot, candidate, rng, sensor, zones=(ZoneId.A, ZoneId.B)):
    '''
    Close the gripper on the candidate. The failure draw always consumes one
    value of the run's stream so reruns stay aligned.
    '''
    failed = rng.random() < robot.pick_failure_rate
    item = None if failed else _item_under_pixel(world, candidate, zones)
    if item is None:
        return world, PickOutcome(None, sensor.read(None))

    source_zone = world.item_zone[item.item_id]
    item_zone = dict(world.item_zone)
    item_zone[item.item_id] = GRIPPED
    bycatch = ()
    partner = item.entangled_with
    if partner is not None and world.item_zone.get(partner) == source_zone:
        item_zone[partner] = GRIPPED
        bycatch = (partner,)
    outcome = PickOutcome(item.item_id, sensor.read(item.thickness_mm), bycatch)
    return world.evolve(item_zone=item_zone, tick=world.tick + 1), outcome


def verify_grasp(reading, baseline, min_delta):
    if reading.channels != baseline.channels:
        raise ChannelMismatchError(f'reading has {reading.channels} channels, baseline {baseline.channels}')
    # Tolerance absorbs float error when offset and load are summed.
    return max(r - b for r, b in zip(reading.normal, baseline.normal)) >= min_delta - 1e-9


def spread_footprint(item, factor):
    '''
    Lay the item out flatter: the footprint grows to round(area x factor)
    cells around its centroid and heights shrink so that area x mean height
    stays the same.
    '''
    if factor == 1.0:
        return item
    if factor < 1.0:
        raise ConfigError('spread factor must be at least 1')
    cells = item.cells
    target = int(round(item.area * factor))
    scale = math.sqrt(factor)
    centroid = cells.mean(axis=0)

    lo = cells.min(axis=0)
    index_map = np.full(cells.max(axis=0) - lo + 1, -1, dtype=np.int64)
    index_map[cells[:, 0] - lo[0], cells[:, 1] - lo[1]] = np.arange(len(cells))

    margin = int(math.ceil(scale)) + 2
    scaled = centroid + (cells - centroid) * scale
    grid_lo = np.floor(scaled.min(axis=0)).astype(np.int64) - margin
    grid_hi = np.ceil(scaled.max(axis=0)).astype(np.int64) + margin
    gi, gj = np.meshgrid(
        np.arange(grid_lo[0], grid_hi[0] + 1), np.arange(grid_lo[1], grid_hi[1] + 1), indexing='ij',
    )
    grid = np.stack([gi.ravel(), gj.ravel()], axis=1)

    source = centroid + (grid - centroid) / scale
    src = np.rint(source).astype(np.int64) - lo
    in_bounds = np.all((src >= 0) & (src < index_map.shape), axis=1)
    src_index = np.full(len(grid), -1, dtype=np.int64)
    src_index[in_bounds] = index_map[src[in_bounds, 0], src[in_bounds, 1]]
    inside = src_index >= 0

    distance = ((grid - centroid) ** 2).sum(axis=1)
    order = np.lexsort((grid[:, 1], grid[:, 0], distance, ~inside))
    chosen = order[:target]

    chosen_src = src_index[chosen]
    missing = chosen_src < 0
    if missing.any():
        gaps = source[chosen[missing]]
        nearest = ((gaps[:, None, :] - cells[None, :, :]) ** 2).sum(axis=2).argmin(axis=1)
        chosen_src[missing] = nearest

    heights = item.heights[chosen_src]
    heights = heights * (item.volume / math.fsum(heights.tolist()))
    return item.evolve(cells=grid[chosen], heights=heights, colors=item.colors[chosen_src])


def shake_and_spread(world, robot, outcome, spread_factor=1.0):
    '''
    Shake over the basket so bycatch drops back into zone A, then pull the
    garment over the table edge so it lies spread out. The garment stays in
    the gripper; placing it on the table is a separate move.
    '''
    if outcome.grasped_item is None:
        raise NoGraspedItemError('nothing to shake: the pick grasped no item')
    items = dict(world.items)
    item_zone = dict(world.item_zone)
    stack = world.next_stack()
    for item_id in outcome.bycatch:
        items[item_id] = items[item_id].evolve(entangled_with=None, stack=stack)
        item_zone[item_id] = ZoneId.A.value
        stack += 1
        logger.warning('%s dropped %s back into the basket', robot.robot_id, item_id)
    grasped = items[outcome.grasped_item]
    if grasped.entangled_with is not None and grasped.entangled_with in items:
        partner = items[grasped.entangled_with]
        if partner.entangled_with == grasped.item_id:
            items[partner.item_id] = partner.evolve(entangled_with=None)
    grasped = grasped.evolve(entangled_with=None)
    if grasped.kind == 'garment':
        grasped = spread_footprint(grasped, spread_factor)
    items[grasped.item_id] = grasped
    return world.evolve(items=items, item_zone=item_zone, tick=world.tick + 1)


def quick_occupancy_check(frame, zone_b_roi, predictor):
    return predictor(frame, zone_b_roi) is not None
