'''
Frame fixtures on disk: `<stem>.png` holds the colour raster, `<stem>.pgm`
the depth raster as 16-bit millimetres and `<stem>.json` the camera id,
timestamp and background values. Depth is rounded to whole millimetres on
save.
'''
import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .cellsim import RgbdFrame, TABLE_RGB
from .exceptions import FrameMismatchError


def encode_png(rgb):
    buffer = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), 'RGB').save(buffer, format='PNG')
    return buffer.getvalue()


def decode_png(data):
    return np.asarray(Image.open(io.BytesIO(data)).convert('RGB'), dtype=np.uint8)


def _paths(stem):
    stem = Path(stem)
    return stem.with_suffix('.png'), stem.with_suffix('.pgm'), stem.with_suffix('.json')


def save_frame(frame, stem):
    png_path, pgm_path, meta_path = _paths(stem)
    png_path.parent.mkdir(parents=True, exist_ok=True)
    png_path.write_bytes(encode_png(frame.rgb))
    depth = np.clip(np.rint(frame.depth_mm), 0, 65535).astype(np.int32)
    Image.fromarray(depth).save(pgm_path, format='PPM')
    meta_path.write_text(json.dumps({
        'camera_id': frame.camera_id,
        'timestamp': frame.timestamp,
        'table_depth_mm': frame.table_depth_mm,
        'table_rgb': list(frame.table_rgb),
    }, sort_keys=True, indent=2))
    return png_path, pgm_path, meta_path


def load_frame(stem):
    png_path, pgm_path, meta_path = _paths(stem)
    for path in (png_path, pgm_path):
        if not path.exists():
            raise FileNotFoundError(f'missing frame file {path}')
    rgb = np.asarray(Image.open(png_path).convert('RGB'), dtype=np.uint8)
    depth = np.asarray(Image.open(pgm_path), dtype=np.float64)
    if rgb.shape[:2] != depth.shape:
        raise FrameMismatchError(f'{stem}: colour {rgb.shape[:2]} and depth {depth.shape} rasters differ')
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return RgbdFrame(
        camera_id=meta.get('camera_id', 'Cam2'),
        rgb=rgb,
        depth_mm=depth,
        timestamp=meta.get('timestamp', 0),
        table_depth_mm=meta.get('table_depth_mm', float(depth.max())),
        table_rgb=tuple(meta.get('table_rgb', TABLE_RGB)),
    )
