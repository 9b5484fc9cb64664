'''
Digital twin snapshots: robots, zones, obstacle boxes and the segmented cloud
of whatever lies on the inspection table, written as JSON next to a PLY file.
'''
import json
import logging
from pathlib import Path

from .cellsim import GRIPPED
from .segmentation import export_cloud

logger = logging.getLogger(__name__)

SNAPSHOT_SCHEMA = 'sortcell.twin/1'
SCHEMA_PATH = Path(__file__).resolve().parent / 'schemas' / 'twin_snapshot.schema.json'


def export_twin_snapshot(world, cloud, robots, obstacles=None, out_dir=None, index=0):
    '''
    Build the snapshot document and, with `out_dir`, write it as
    `snapshot_NNNN.json` plus `cloud_NNNN.ply`. An empty or missing cloud
    leaves the cloud reference null.
    '''
    obstacles = world.layout.obstacles if obstacles is None else obstacles
    cloud_path = None
    if out_dir is not None and cloud is not None and len(cloud):
        out_dir = Path(out_dir)
        export_cloud(cloud, out_dir / f'cloud_{index:04d}.ply')
        cloud_path = f'cloud_{index:04d}.ply'

    document = {
        'schema': SNAPSHOT_SCHEMA,
        'tick': world.tick,
        'robots': [
            {
                'id': robot.robot_id,
                'base': list(robot.base_position),
                'reach_mm': [robot.reach_min_mm, robot.reach_max_mm],
            }
            for robot in robots.values()
        ],
        'zones': [
            {'id': str(zone_id), 'rect': zone.rect.to_document()}
            for zone_id, zone in world.layout.zones.items()
        ],
        'obstacles': [box.to_document() for box in obstacles],
        'cloud': {'path': cloud_path, 'points': len(cloud) if cloud is not None else 0},
        'gripped': sorted(item_id for item_id, zone in world.item_zone.items() if zone == GRIPPED),
    }
    if out_dir is not None:
        snapshot_path = Path(out_dir) / f'snapshot_{index:04d}.json'
        snapshot_path.parent.mkdir(parents=True, exist_ok=True)
        snapshot_path.write_text(json.dumps(document, indent=2, sort_keys=True) + '\n')
        logger.debug('wrote twin snapshot %s (%d cloud points)', snapshot_path, document['cloud']['points'])
    return document


def load_schema():
    return json.loads(SCHEMA_PATH.read_text())
