'''
Deterministic simulated world of the sorting cell.

The world is a 2.5D top-down grid of millimetre cells. Each item owns a
footprint of grid cells with a height and a colour per cell. Zone A holds the
basket, zone B is the inspection table seen by Cam 2 and zone C holds one bin
per sortable class. Cameras look straight down and render registered RGB and
depth rasters from the grid.

Every operation here is a pure function of its inputs: worlds are never
mutated in place, a changed world is returned instead.
'''
import functools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from django.db import models

from .exceptions import (
    BasketAbsentError, ConfigError, PlacementError, SceneCapacityError,
    UnknownItemError,
)

logger = logging.getLogger(__name__)


class GarmentClass(models.TextChoices):
    SHIRT = 'shirt', 'Shirt'
    SOCK = 'sock', 'Sock'
    TROUSERS = 'trousers', 'Trousers'
    UNDERWEAR = 'underwear', 'Underwear'
    OTHER = 'other', 'Other'
    EMPTY = 'empty', 'Empty'


# Fixed order used by matrices, reports and ensemble tie breaks.
CLASS_ORDER = tuple(GarmentClass)

# Classes a physical item can carry. `empty` only ever labels a scene.
ITEM_CLASSES = CLASS_ORDER[:5]


class ZoneId(models.TextChoices):
    A = 'A', 'Basket'
    B = 'B', 'Inspection table'
    C = 'C', 'Sorting bins'


GRIPPED = 'gripped'

TABLE_RGB = (128, 128, 128)
RIM_COLOR_KEY = (255, 0, 255)
MIN_TABLE_CONTRAST = 15


@dataclass(frozen=True)
class Rect:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ConfigError(f'degenerate rectangle {self}')

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def contains(self, x, y):
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def overlaps(self, other):
        return not (
            self.x_max <= other.x_min or other.x_max <= self.x_min
            or self.y_max <= other.y_min or other.y_max <= self.y_min
        )

    def to_document(self):
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_document(cls, values):
        return cls(*[float(v) for v in values])


@dataclass(frozen=True)
class Box:
    """Axis-aligned obstacle box of the digital twin, world millimetres."""
    min_xyz: tuple
    max_xyz: tuple
    name: str = ''

    def __post_init__(self):
        if any(lo >= hi for lo, hi in zip(self.min_xyz, self.max_xyz)):
            raise ConfigError(f'degenerate box {self.name or self}')

    def to_document(self):
        return {'name': self.name, 'min': list(self.min_xyz), 'max': list(self.max_xyz)}


@dataclass(frozen=True)
class Zone:
    zone_id: str
    rect: Rect
    bins: dict = field(default_factory=dict)


@dataclass(eq=False)
class CameraModel:
    """
    Pinhole camera with a rigid camera-to-world pose.

    `rotation` and `translation` map camera coordinates to world coordinates:
    p_world = rotation @ p_cam + translation. Depth is the distance along the
    optical axis (camera z).
    """
    camera_id: str
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray
    translation: np.ndarray
    table_depth_mm: float

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError(f'{self.camera_id}: focal lengths must be positive')
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ConfigError(f'{self.camera_id}: principal point outside the image')
        if self.table_depth_mm <= 0:
            raise ConfigError(f'{self.camera_id}: table depth must be positive')

    @property
    def resolution(self):
        return (self.width, self.height)

    def to_world(self, u, v, depth):
        """Back-project pixel coordinates at the given depth; broadcasts over arrays."""
        z = np.asarray(depth, dtype=np.float64)
        x_cam = (np.asarray(u, dtype=np.float64) - self.cx) * z / self.fx
        y_cam = (np.asarray(v, dtype=np.float64) - self.cy) * z / self.fy
        cam = np.stack(np.broadcast_arrays(x_cam, y_cam, z), axis=-1)
        return cam @ self.rotation.T + self.translation

    def to_pixel(self, points):
        """Project world points to (u, v, depth); the inverse of to_world."""
        cam = (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation
        z = cam[..., 2]
        u = self.fx * cam[..., 0] / z + self.cx
        v = self.fy * cam[..., 1] / z + self.cy
        return np.stack([u, v, z], axis=-1)

    def to_document(self):
        return {
            'id': self.camera_id,
            'fx': self.fx, 'fy': self.fy, 'cx': self.cx, 'cy': self.cy,
            'width': self.width, 'height': self.height,
            'rotation': self.rotation.tolist(),
            'translation': self.translation.tolist(),
            'table_depth_mm': self.table_depth_mm,
        }


def top_down_camera(camera_id, center_xy, table_depth_mm=800.0, width=640, height=480, focal=600.0):
    """Camera mounted `table_depth_mm` above `center_xy`, looking straight down."""
    return CameraModel(
        camera_id=camera_id,
        fx=focal, fy=focal,
        cx=width / 2.0, cy=height / 2.0,
        width=width, height=height,
        rotation=np.diag([1.0, -1.0, -1.0]),
        translation=np.array([center_xy[0], center_xy[1], table_depth_mm]),
        table_depth_mm=table_depth_mm,
    )


@dataclass(eq=False)
class CellLayout:
    cell_mm: float
    zones: dict
    basket: Rect
    cameras: dict
    obstacles: list = field(default_factory=list)
    rim_mm: float = 10.0
    rim_color: tuple = RIM_COLOR_KEY
    table_rgb: tuple = TABLE_RGB

    def __post_init__(self):
        rects = [zone.rect for zone in self.zones.values()]
        for i, first in enumerate(rects):
            for second in rects[i + 1:]:
                if first.overlaps(second):
                    raise ConfigError('zone rectangles must be pairwise disjoint')
        zone_a = self.zones[ZoneId.A].rect
        if not (zone_a.contains(self.basket.x_min, self.basket.y_min)
                and zone_a.contains(self.basket.x_max, self.basket.y_max)):
            raise ConfigError('the basket must lie inside zone A')

    def bin_rect(self, garment_class):
        return self.zones[ZoneId.C].bins[GarmentClass(garment_class)]

    def camera_for(self, zone_id):
        return self.cameras['Cam1' if zone_id == ZoneId.A else 'Cam2']


def default_layout(cell_mm=5.0):
    """
    The reference cell: basket in A under Cam 1, inspection table B under Cam 2,
    five 400 mm bins in C. None of these dimensions are published; they are
    defaults that keep zone B out of Cam 1's view and the reverse.
    """
    bins = {}
    for index, garment_class in enumerate(ITEM_CLASSES):
        x0 = -500.0 + 400.0 * index
        bins[garment_class] = Rect(x0, 675.0, x0 + 400.0, 1075.0)
    zones = {
        ZoneId.A: Zone(ZoneId.A, Rect(-300.0, -250.0, 300.0, 250.0)),
        ZoneId.B: Zone(ZoneId.B, Rect(650.0, -200.0, 1150.0, 200.0)),
        ZoneId.C: Zone(ZoneId.C, Rect(-500.0, 650.0, 1500.0, 1100.0), bins),
    }
    cameras = {
        'Cam1': top_down_camera('Cam1', (0.0, 0.0)),
        'Cam2': top_down_camera('Cam2', (900.0, 0.0)),
    }
    obstacles = [
        Box((-420.0, -380.0, 0.0), (-380.0, -340.0, 1200.0), 'cam1_mast'),
        Box((1200.0, -380.0, 0.0), (1240.0, -340.0, 1200.0), 'cam2_mast'),
    ]
    return CellLayout(
        cell_mm=cell_mm,
        zones=zones,
        basket=Rect(-250.0, -200.0, 250.0, 200.0),
        cameras=cameras,
        obstacles=obstacles,
    )


@dataclass(eq=False)
class Item:
    '''
    A physical item in the cell: a garment or a foreign object.

    `cells` are integer grid coordinates (N x 2), `heights` the height above
    the table per cell in millimetres and `colors` an 8-bit triple per cell.
    `stack` orders items that pile up; a larger value lies on top.
    '''
    item_id: str
    true_class: str
    cells: np.ndarray
    heights: np.ndarray
    colors: np.ndarray
    thickness_mm: float
    entangled_with: Optional[str] = None
    stack: int = 0
    kind: str = 'garment'

    def __post_init__(self):
        self.true_class = GarmentClass(self.true_class)
        self.cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, 2)
        self.heights = np.asarray(self.heights, dtype=np.float64).reshape(-1)
        self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
        if self.true_class == GarmentClass.EMPTY:
            raise ConfigError(f'{self.item_id}: "empty" is not a physical item class')
        if len(self.cells) == 0:
            raise ConfigError(f'{self.item_id}: footprint is empty')
        if len(self.heights) != len(self.cells) or len(self.colors) != len(self.cells):
            raise ConfigError(f'{self.item_id}: per-cell arrays differ in length')
        if not np.all(self.heights > 0) or self.thickness_mm <= 0:
            raise ConfigError(f'{self.item_id}: heights and thickness must be positive')

    @property
    def area(self):
        return len(self.cells)

    @property
    def mean_height(self):
        return float(self.heights.mean())

    @property
    def volume(self):
        return math.fsum(self.heights.tolist())

    def centroid_cell(self):
        return self.cells.mean(axis=0)

    def centroid_mm(self, cell_mm):
        return (self.centroid_cell() + 0.5) * cell_mm

    def evolve(self, **changes):
        return replace(self, **changes)


@dataclass(eq=False)
class WorldState:
    items: dict
    item_zone: dict
    layout: CellLayout
    rng_seed: int
    tick: int = 0

    def __post_init__(self):
        if set(self.items) != set(self.item_zone):
            raise ConfigError('every item needs exactly one location')

    @property
    def basket_rect_world(self):
        return self.layout.basket

    def item(self, item_id):
        try:
            return self.items[item_id]
        except KeyError:
            raise UnknownItemError(f'unknown item id {item_id!r}') from None

    def zone_of(self, item_id):
        self.item(item_id)
        return self.item_zone[item_id]

    def items_in(self, zone_id):
        return [item for item_id, item in self.items.items() if self.item_zone[item_id] == zone_id]

    def bin_of(self, item_id):
        """The bin class whose rectangle holds the item's centroid, if it sits in zone C."""
        if self.zone_of(item_id) != ZoneId.C:
            return None
        x, y = self.item(item_id).centroid_mm(self.layout.cell_mm)
        for garment_class, rect in self.layout.zones[ZoneId.C].bins.items():
            if rect.contains(x, y):
                return garment_class
        return None

    def next_stack(self):
        return max((item.stack for item in self.items.values()), default=-1) + 1

    def topmost_at(self, x_mm, y_mm, zones=(ZoneId.A, ZoneId.B, ZoneId.C)):
        '''
        The item whose surface is visible at a world position: the covering
        item highest in the stacking order.
        '''
        cell = np.floor(np.array([x_mm, y_mm]) / self.layout.cell_mm).astype(np.int64)
        best, best_key = None, None
        for item_id, item in self.items.items():
            if self.item_zone[item_id] not in zones:
                continue
            hits = np.nonzero(np.all(item.cells == cell, axis=1))[0]
            if len(hits) == 0:
                continue
            key = (item.stack, float(item.heights[hits].max()))
            if best_key is None or key > best_key:
                best, best_key = item, key
        return best

    def evolve(self, items=None, item_zone=None, tick=None):
        return replace(
            self,
            items=dict(self.items if items is None else items),
            item_zone=dict(self.item_zone if item_zone is None else item_zone),
            tick=self.tick if tick is None else tick,
        )


@dataclass(frozen=True)
class ItemTemplate:
    size_mm: tuple
    height_mm: float
    thickness_mm: float
    color: tuple
    dome: bool = True


ITEM_TEMPLATES = {
    GarmentClass.SHIRT: ItemTemplate((180.0, 140.0), 40.0, 3.0, (40, 90, 200)),
    GarmentClass.SOCK: ItemTemplate((100.0, 50.0), 15.0, 5.0, (200, 40, 40)),
    GarmentClass.TROUSERS: ItemTemplate((220.0, 150.0), 50.0, 4.0, (30, 40, 70)),
    GarmentClass.UNDERWEAR: ItemTemplate((110.0, 90.0), 20.0, 2.0, (230, 200, 60)),
    GarmentClass.OTHER: ItemTemplate((150.0, 120.0), 30.0, 3.0, (60, 160, 80)),
}

FOREIGN_TEMPLATES = (
    ItemTemplate((200.0, 70.0), 70.0, 60.0, (210, 230, 240), dome=False),
    ItemTemplate((65.0, 65.0), 120.0, 65.0, (190, 20, 30), dome=False),
)


@dataclass(frozen=True)
class SceneSpec:
    counts: dict
    foreign_objects: int = 0
    entangle_p: float = 0.0
    max_entangled_pairs: Optional[int] = None
    stacking_factor: float = 4.0
    name: str = ''

    def __post_init__(self):
        counts = {GarmentClass(k): int(v) for k, v in self.counts.items()}
        if GarmentClass.EMPTY in counts and counts.pop(GarmentClass.EMPTY):
            raise ConfigError('a scene cannot contain items of class "empty"')
        object.__setattr__(self, 'counts', counts)
        if any(v < 0 for v in counts.values()) or self.foreign_objects < 0:
            raise ConfigError('item counts must be non-negative')
        if not 0.0 <= self.entangle_p <= 1.0:
            raise ConfigError('entangle_p must lie in [0, 1]')
        if self.max_entangled_pairs is not None and self.max_entangled_pairs < 0:
            raise ConfigError('max_entangled_pairs must be non-negative')
        if self.stacking_factor <= 0:
            raise ConfigError('stacking_factor must be positive')

    @property
    def total_items(self):
        return sum(self.counts.values()) + self.foreign_objects


def _contrasting_colors(base, rng, count, table_rgb):
    jitter = rng.integers(-8, 9, size=(count, 3))
    colors = np.clip(np.asarray(base, dtype=np.int64) + jitter, 0, 255)
    table = np.asarray(table_rgb, dtype=np.int64)
    weak = np.abs(colors - table).max(axis=1) <= MIN_TABLE_CONTRAST
    if weak.any():
        # Push the first channel away from the table grey.
        shift = np.where(colors[weak, 0] >= table[0], MIN_TABLE_CONTRAST + 1, -(MIN_TABLE_CONTRAST + 1))
        colors[weak, 0] = np.clip(table[0] + shift, 0, 255)
    return colors.astype(np.uint8)


def _footprint(template, rng, cell_mm):
    scale = rng.uniform(0.85, 1.15)
    semi_a = template.size_mm[0] * scale / 2.0
    semi_b = template.size_mm[1] * scale / 2.0
    angle = rng.uniform(0.0, math.pi)
    reach = int(math.ceil(max(semi_a, semi_b) / cell_mm)) + 1
    grid = np.arange(-reach, reach + 1)
    ii, jj = np.meshgrid(grid, grid, indexing='ij')
    x = (ii + 0.5) * cell_mm
    y = (jj + 0.5) * cell_mm
    xr = x * math.cos(angle) + y * math.sin(angle)
    yr = -x * math.sin(angle) + y * math.cos(angle)
    r2 = (xr / semi_a) ** 2 + (yr / semi_b) ** 2
    inside = r2 <= 1.0
    if not inside.any():
        inside[reach, reach] = True
    cells = np.stack([ii[inside], jj[inside]], axis=1)
    if template.dome:
        heights = template.height_mm * (1.0 - 0.6 * r2[inside])
    else:
        heights = np.full(len(cells), template.height_mm)
    return cells, heights, max(semi_a, semi_b)


def spawn_scene(spec, seed, layout=None):
    '''
    Throw the requested items into the basket. Items may overlap; stacking
    order is the insertion order shuffled by the seed, and garments are linked
    into entangled pairs walking a seeded shuffle two by two.
    '''
    layout = layout or default_layout()
    rng = np.random.default_rng(seed)
    basket = layout.basket
    cell = layout.cell_mm

    plan = []
    for garment_class in ITEM_CLASSES:
        plan.extend([(garment_class, ITEM_TEMPLATES[garment_class], 'garment')] * spec.counts.get(garment_class, 0))
    for index in range(spec.foreign_objects):
        plan.append((GarmentClass.OTHER, FOREIGN_TEMPLATES[index % len(FOREIGN_TEMPLATES)], 'foreign'))

    shapes = [_footprint(template, rng, cell) for _, template, _ in plan]
    footprint_area = sum(len(cells) for cells, _, _ in shapes) * cell * cell
    capacity = basket.area * spec.stacking_factor
    if footprint_area > capacity:
        raise SceneCapacityError(
            f'scene needs {footprint_area:.0f} mm^2 of footprint but the basket holds '
            f'{capacity:.0f} mm^2 ({basket.area:.0f} mm^2 x stacking factor {spec.stacking_factor})'
        )

    inner = layout.rim_mm
    items = {}
    for index, ((garment_class, template, kind), (cells, heights, radius)) in enumerate(zip(plan, shapes)):
        lo_x, hi_x = basket.x_min + inner + radius, basket.x_max - inner - radius
        lo_y, hi_y = basket.y_min + inner + radius, basket.y_max - inner - radius
        if lo_x > hi_x or lo_y > hi_y:
            raise SceneCapacityError(f'{garment_class} footprint of radius {radius:.0f} mm does not fit the basket')
        center = np.array([rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)])
        offset = np.floor(center / cell).astype(np.int64)
        item_id = f'item-{index:03d}'
        items[item_id] = Item(
            item_id=item_id,
            true_class=garment_class,
            cells=cells + offset,
            heights=heights,
            colors=_contrasting_colors(template.color, rng, len(cells), layout.table_rgb),
            thickness_mm=template.thickness_mm,
            kind=kind,
        )

    order = rng.permutation(len(items))
    for item, stack in zip(items.values(), order):
        item.stack = int(stack)

    garments = [item_id for item_id, item in items.items() if item.kind == 'garment']
    shuffled = [garments[i] for i in rng.permutation(len(garments))]
    linked = 0
    for first, second in zip(shuffled[0::2], shuffled[1::2]):
        if spec.max_entangled_pairs is not None and linked >= spec.max_entangled_pairs:
            break
        if rng.random() < spec.entangle_p:
            items[first].entangled_with = second
            items[second].entangled_with = first
            linked += 1

    logger.debug('spawned %d items (%d entangled pairs) with seed %s', len(items), linked, seed)
    return WorldState(
        items=items,
        item_zone={item_id: ZoneId.A.value for item_id in items},
        layout=layout,
        rng_seed=seed,
    )


@dataclass(eq=False)
class RgbdFrame:
    camera_id: str
    rgb: np.ndarray
    depth_mm: np.ndarray
    timestamp: int
    table_depth_mm: float
    table_rgb: tuple = TABLE_RGB

    @property
    def width(self):
        return self.depth_mm.shape[1]

    @property
    def height(self):
        return self.depth_mm.shape[0]

    def copy(self):
        return replace(self, rgb=self.rgb.copy(), depth_mm=self.depth_mm.copy())

    def same_as(self, other):
        return (
            self.camera_id == other.camera_id
            and np.array_equal(self.rgb, other.rgb)
            and np.array_equal(self.depth_mm, other.depth_mm)
        )


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel rectangle."""
    u_min: int
    v_min: int
    u_max: int
    v_max: int

    def __post_init__(self):
        if not (self.u_min < self.u_max and self.v_min < self.v_max):
            raise ConfigError(f'degenerate bounding box {self}')

    @classmethod
    def full(cls, frame):
        return cls(0, 0, frame.width - 1, frame.height - 1)

    def valid_for(self, frame):
        return self.u_min >= 0 and self.v_min >= 0 and self.u_max < frame.width and self.v_max < frame.height

    def mask(self, height, width):
        inside = np.zeros((height, width), dtype=bool)
        inside[self.v_min:self.v_max + 1, self.u_min:self.u_max + 1] = True
        return inside

    def contains(self, u, v):
        return self.u_min <= u <= self.u_max and self.v_min <= v <= self.v_max

    def as_tuple(self):
        return (self.u_min, self.v_min, self.u_max, self.v_max)


def _surface(items, cell_mm):
    '''
    Per-cell visible surface over the bounding grid of the items:
    returns (origin, heights, colors, owner index). The height of a cell is
    the maximum over the items covering it; colour and owner come from the
    covering item highest in the stacking order.
    '''
    cells = np.concatenate([item.cells for item in items])
    heights = np.concatenate([item.heights for item in items])
    colors = np.concatenate([item.colors for item in items])
    stacks = np.concatenate([np.full(item.area, item.stack) for item in items])
    owners = np.concatenate([np.full(item.area, index) for index, item in enumerate(items)])

    origin = cells.min(axis=0)
    span = cells.max(axis=0) - origin + 1
    local = cells - origin
    linear = local[:, 0] * span[1] + local[:, 1]
    order = np.lexsort((owners, stacks, linear))
    linear_sorted = linear[order]
    last = np.r_[linear_sorted[1:] != linear_sorted[:-1], True]
    winners = order[last]

    surface_h = np.zeros(span, dtype=np.float64)
    surface_rgb = np.zeros((span[0], span[1], 3), dtype=np.uint8)
    surface_owner = np.full(span, -1, dtype=np.int64)
    np.maximum.at(surface_h, (local[:, 0], local[:, 1]), heights)
    surface_rgb[local[winners, 0], local[winners, 1]] = colors[winners]
    surface_owner[local[winners, 0], local[winners, 1]] = owners[winners]
    return origin, surface_h, surface_rgb, surface_owner


@functools.lru_cache(maxsize=16)
def pixel_cells(camera, cell_mm):
    """Grid cell seen by every pixel, through the table plane. Read-only."""
    vv, uu = np.mgrid[0:camera.height, 0:camera.width]
    world = camera.to_world(uu, vv, camera.table_depth_mm)
    cells = np.floor(world[..., :2] / cell_mm).astype(np.int64)
    cells.flags.writeable = False
    return cells


def render_camera(world, camera_id, noise: Optional[Callable] = None):
    '''
    Render the registered RGB-D frame of a top-down camera. Depth is the table
    depth minus the visible surface height; the basket rim is drawn in the
    reserved colour key and carries no height.
    '''
    layout = world.layout
    camera = layout.cameras[camera_id]
    cell = layout.cell_mm
    cells = pixel_cells(camera, cell)
    height_map = np.zeros((camera.height, camera.width), dtype=np.float64)
    rgb = np.empty((camera.height, camera.width, 3), dtype=np.uint8)
    rgb[...] = layout.table_rgb

    centers = (cells + 0.5) * cell
    basket, rim = layout.basket, layout.rim_mm
    in_basket = (
        (centers[..., 0] >= basket.x_min) & (centers[..., 0] <= basket.x_max)
        & (centers[..., 1] >= basket.y_min) & (centers[..., 1] <= basket.y_max)
    )
    in_interior = (
        (centers[..., 0] >= basket.x_min + rim) & (centers[..., 0] <= basket.x_max - rim)
        & (centers[..., 1] >= basket.y_min + rim) & (centers[..., 1] <= basket.y_max - rim)
    )
    rgb[in_basket & ~in_interior] = layout.rim_color

    visible = [item for item_id, item in world.items.items() if world.item_zone[item_id] != GRIPPED]
    if visible:
        origin, surface_h, surface_rgb, _ = _surface(visible, cell)
        local = cells - origin
        hit = (
            (local[..., 0] >= 0) & (local[..., 0] < surface_h.shape[0])
            & (local[..., 1] >= 0) & (local[..., 1] < surface_h.shape[1])
        )
        rows, cols = local[hit, 0], local[hit, 1]
        covered = np.zeros_like(hit)
        covered[hit] = surface_h[rows, cols] > 0
        height_map[hit] = surface_h[rows, cols]
        rgb[covered] = surface_rgb[local[covered, 0], local[covered, 1]]

    depth = camera.table_depth_mm - height_map
    if noise is not None:
        depth, rgb = noise(depth, rgb)
    return RgbdFrame(
        camera_id=camera_id,
        rgb=rgb,
        depth_mm=depth,
        timestamp=world.tick,
        table_depth_mm=camera.table_depth_mm,
        table_rgb=tuple(layout.table_rgb),
    )


def compute_basket_bbox(frame, basket_color_key=RIM_COLOR_KEY, margin=0):
    matches = np.all(frame.rgb == np.asarray(basket_color_key, dtype=np.uint8), axis=2)
    if not matches.any():
        raise BasketAbsentError()
    vs, us = np.nonzero(matches)
    return BoundingBox(
        u_min=max(int(us.min()) - margin, 0),
        v_min=max(int(vs.min()) - margin, 0),
        u_max=min(int(us.max()) + margin, frame.width - 1),
        v_max=min(int(vs.max()) + margin, frame.height - 1),
    )


def apply_bounding_box(frame, bbox):
    cropped = frame.copy()
    outside = ~bbox.mask(frame.height, frame.width)
    cropped.depth_mm[outside] = frame.table_depth_mm
    cropped.rgb[outside] = frame.table_rgb
    return cropped


def zone_roi(camera, rect):
    """Pixel rectangle covering a world rectangle on the table plane, clipped to the frame."""
    corners = np.array([
        [rect.x_min, rect.y_min, 0.0], [rect.x_max, rect.y_min, 0.0],
        [rect.x_min, rect.y_max, 0.0], [rect.x_max, rect.y_max, 0.0],
    ])
    pixels = camera.to_pixel(corners)
    return BoundingBox(
        u_min=max(int(math.floor(pixels[:, 0].min())), 0),
        v_min=max(int(math.floor(pixels[:, 1].min())), 0),
        u_max=min(int(math.ceil(pixels[:, 0].max())), camera.width - 1),
        v_max=min(int(math.ceil(pixels[:, 1].max())), camera.height - 1),
    )


@dataclass(frozen=True)
class Placement:
    zone: str
    bin: Optional[str] = None
    x_mm: Optional[float] = None
    y_mm: Optional[float] = None


def _fit_offset(cells, rect, cell_mm, target):
    lo_cell = np.array([math.ceil(rect.x_min / cell_mm), math.ceil(rect.y_min / cell_mm)])
    hi_cell = np.array([math.floor(rect.x_max / cell_mm) - 1, math.floor(rect.y_max / cell_mm) - 1])
    span = cells.max(axis=0) - cells.min(axis=0)
    if np.any(span > hi_cell - lo_cell):
        raise PlacementError(f'footprint of {span + 1} cells does not fit {rect}')
    centroid = cells.mean(axis=0)
    offset = np.round(np.asarray(target) / cell_mm - 0.5 - centroid).astype(np.int64)
    offset = offset + np.maximum(lo_cell - (cells.min(axis=0) + offset), 0)
    offset = offset - np.maximum(cells.max(axis=0) + offset - hi_cell, 0)
    return offset


def move_item(world, item_id, destination):
    item = world.item(item_id)
    try:
        zone = world.layout.zones[ZoneId(destination.zone)]
    except (ValueError, KeyError):
        raise PlacementError(f'unknown destination zone {destination.zone!r}') from None
    rect = zone.rect
    if destination.bin is not None:
        try:
            rect = zone.bins[GarmentClass(destination.bin)]
        except (ValueError, KeyError):
            raise PlacementError(f'zone {zone.zone_id} has no bin {destination.bin!r}') from None
    target = rect.center
    if destination.x_mm is not None and destination.y_mm is not None:
        target = (destination.x_mm, destination.y_mm)
    offset = _fit_offset(item.cells, rect, world.layout.cell_mm, target)

    items = dict(world.items)
    items[item_id] = item.evolve(cells=item.cells + offset, stack=world.next_stack())
    item_zone = dict(world.item_zone)
    item_zone[item_id] = ZoneId(destination.zone).value
    return world.evolve(items=items, item_zone=item_zone, tick=world.tick + 1)


def world_to_document(world):
    layout = world.layout
    zones = {}
    for zone_id, zone in layout.zones.items():
        entry = {'rect': zone.rect.to_document()}
        if zone.bins:
            entry['bins'] = {str(k): rect.to_document() for k, rect in zone.bins.items()}
        zones[str(zone_id)] = entry
    return {
        'seed': world.rng_seed,
        'tick': world.tick,
        'cell_mm': layout.cell_mm,
        'basket': layout.basket.to_document(),
        'zones': zones,
        'items': [
            {
                'id': item.item_id,
                'class': str(item.true_class),
                'kind': item.kind,
                'zone': world.item_zone[item.item_id],
                'stack': item.stack,
                'thickness_mm': item.thickness_mm,
                'entangled_with': item.entangled_with,
                'cells': item.cells.tolist(),
                'heights_mm': item.heights.tolist(),
                'colors': item.colors.tolist(),
            }
            for item in world.items.values()
        ],
    }


def world_from_document(document, layout=None):
    layout = layout or default_layout(cell_mm=document.get('cell_mm', 5.0))
    items, item_zone = {}, {}
    for entry in document['items']:
        items[entry['id']] = Item(
            item_id=entry['id'],
            true_class=entry['class'],
            cells=entry['cells'],
            heights=entry['heights_mm'],
            colors=entry['colors'],
            thickness_mm=entry['thickness_mm'],
            entangled_with=entry.get('entangled_with'),
            stack=entry.get('stack', 0),
            kind=entry.get('kind', 'garment'),
        )
        item_zone[entry['id']] = entry['zone']
    return WorldState(
        items=items,
        item_zone=item_zone,
        layout=layout,
        rng_seed=document['seed'],
        tick=document['tick'],
    )
