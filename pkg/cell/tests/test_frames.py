import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from cell.cellsim import RgbdFrame
from cell.exceptions import FrameMismatchError
from cell.frames import decode_png, encode_png, load_frame, save_frame


def random_frame(seed=0, width=32, height=24):
    rng = np.random.default_rng(seed)
    return RgbdFrame(
        camera_id='Cam2',
        rgb=rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8),
        depth_mm=rng.uniform(600.0, 800.0, size=(height, width)),
        timestamp=17,
        table_depth_mm=800.0,
    )


class FrameFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.stem = Path(self.tmp.name) / 'frames' / 'scene_001'

    def test_png_keeps_colours(self):
        frame = random_frame()
        np.testing.assert_array_equal(decode_png(encode_png(frame.rgb)), frame.rgb)

    def test_saved_frame_loads_back(self):
        frame = random_frame(seed=3)
        paths = save_frame(frame, self.stem)
        self.assertEqual([p.suffix for p in paths], ['.png', '.pgm', '.json'])
        loaded = load_frame(self.stem)
        np.testing.assert_array_equal(loaded.rgb, frame.rgb)
        np.testing.assert_array_equal(loaded.depth_mm, np.rint(frame.depth_mm))
        self.assertEqual(loaded.camera_id, 'Cam2')
        self.assertEqual(loaded.timestamp, 17)
        self.assertEqual(loaded.table_depth_mm, 800.0)

    def test_missing_depth_file(self):
        save_frame(random_frame(), self.stem)
        self.stem.with_suffix('.pgm').unlink()
        with self.assertRaises(FileNotFoundError):
            load_frame(self.stem)

    def test_raster_sizes_must_agree(self):
        save_frame(random_frame(), self.stem)
        self.stem.with_suffix('.png').write_bytes(encode_png(np.zeros((10, 10, 3), dtype=np.uint8)))
        with self.assertRaises(FrameMismatchError):
            load_frame(self.stem)
