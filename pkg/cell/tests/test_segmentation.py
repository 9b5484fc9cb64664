import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from cell.cellsim import RgbdFrame, top_down_camera
from cell.exceptions import BaselineError, ConfigError, FrameMismatchError
from cell.segmentation import (
    ColoredPointCloud, SegBaseline, SegThresholds, capture_baseline, export_cloud,
    foreground_mask, load_baseline, read_cloud, save_baseline, segment,
)

DEPTH_STEPS = np.array([-20, -16, -6, -5, -1, 0, 0, 0, 1, 5, 6, 16, 20])
COLOUR_STEPS = np.array([-40, -16, -15, -3, 0, 0, 0, 0, 3, 15, 16, 40])


def frame_of(rgb, depth, camera_id='Cam2', timestamp=0):
    return RgbdFrame(camera_id, rgb, depth, timestamp, 800.0)


def random_pair(rng, width, height):
    '''
    Baseline and frame with integer-valued depths so that the threshold
    boundaries (exactly 5 mm, exactly 15 levels) occur in the data.
    '''
    base_depth = rng.integers(700, 781, size=(height, width)).astype(np.float64)
    base_rgb = rng.integers(40, 216, size=(height, width, 3)).astype(np.uint8)
    touched = rng.random((height, width)) < 0.3
    depth = base_depth + np.where(touched, rng.choice(DEPTH_STEPS, size=(height, width)), 0)
    tint = np.where(touched[..., None], rng.choice(COLOUR_STEPS, size=(height, width, 3)), 0)
    rgb = (base_rgb.astype(np.int64) + tint).astype(np.uint8)
    baseline = SegBaseline('Cam2', base_rgb, base_depth, 1)
    return baseline, frame_of(rgb, depth, timestamp=int(rng.integers(0, 1000)))


def brute_force_segment(frame, baseline, camera, depth_delta=5.0, rgb_delta=15):
    points, colours, pixels = [], [], []
    R = camera.rotation.tolist()
    t = camera.translation.tolist()
    for v in range(frame.height):
        for u in range(frame.width):
            d = float(frame.depth_mm[v, u])
            changed = abs(d - float(baseline.baseline_depth_mm[v, u])) > depth_delta
            for channel in range(3):
                if abs(int(frame.rgb[v, u, channel]) - int(baseline.baseline_rgb[v, u, channel])) > rgb_delta:
                    changed = True
            if not changed:
                continue
            cam = [(u - camera.cx) * d / camera.fx, (v - camera.cy) * d / camera.fy, d]
            points.append([sum(R[i][j] * cam[j] for j in range(3)) + t[i] for i in range(3)])
            colours.append([int(c) for c in frame.rgb[v, u]])
            pixels.append([u, v])
    return points, colours, pixels


def vectorised_segment(frame, baseline, camera, depth_delta=5.0, rgb_delta=15):
    changed = np.abs(frame.depth_mm - baseline.baseline_depth_mm) > depth_delta
    for channel in range(3):
        diff = frame.rgb[..., channel].astype(np.int64) - baseline.baseline_rgb[..., channel].astype(np.int64)
        changed |= np.abs(diff) > rgb_delta
    vs, us = np.argwhere(changed).T
    d = frame.depth_mm[vs, us]
    cam = np.column_stack([(us - camera.cx) * d / camera.fx, (vs - camera.cy) * d / camera.fy, d])
    points = np.einsum('ij,nj->ni', camera.rotation, cam) + camera.translation
    return points, frame.rgb[vs, us], np.column_stack([us, vs])


class BaselineTests(SimpleTestCase):
    def frames(self, depths):
        return [
            frame_of(np.full((2, 3, 3), d, dtype=np.uint8), np.full((2, 3), float(d)))
            for d in depths
        ]

    def test_lower_median_per_pixel(self):
        self.assertTrue(np.all(capture_baseline(self.frames([3, 1, 2])).baseline_depth_mm == 2.0))
        baseline = capture_baseline(self.frames([1, 3]))
        self.assertTrue(np.all(baseline.baseline_depth_mm == 1.0))
        self.assertTrue(np.all(baseline.baseline_rgb == 1))
        self.assertEqual(baseline.frame_count_used, 2)

    def test_no_frames(self):
        with self.assertRaises(BaselineError):
            capture_baseline([])

    def test_frames_from_two_cameras(self):
        frames = self.frames([1, 2])
        frames[1].camera_id = 'Cam1'
        with self.assertRaises(BaselineError):
            capture_baseline(frames)

    def test_baseline_on_disk(self):
        baseline = capture_baseline(self.frames([700, 701, 702]))
        with tempfile.TemporaryDirectory() as tmp:
            save_baseline(baseline, tmp, table_depth_mm=800.0)
            loaded = load_baseline(tmp)
        np.testing.assert_array_equal(loaded.baseline_depth_mm, baseline.baseline_depth_mm)
        np.testing.assert_array_equal(loaded.baseline_rgb, baseline.baseline_rgb)
        self.assertEqual(loaded.frame_count_used, 3)

    def test_missing_baseline(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(BaselineError):
                load_baseline(Path(tmp) / 'nowhere')
            with self.assertRaises(BaselineError):
                load_baseline(tmp)


class ThresholdTests(SimpleTestCase):
    def test_thresholds_must_be_positive(self):
        with self.assertRaises(ConfigError):
            SegThresholds(depth_delta_mm=0.0)
        with self.assertRaises(ConfigError):
            SegThresholds(rgb_delta=0)

    def test_boundaries_are_background(self):
        base_rgb = np.full((1, 4, 3), 100, dtype=np.uint8)
        base_depth = np.full((1, 4), 700.0)
        baseline = SegBaseline('Cam2', base_rgb, base_depth, 1)
        rgb = base_rgb.copy()
        depth = base_depth.copy()
        depth[0, 0] = 705.0
        depth[0, 1] = 706.0
        rgb[0, 2, 1] = 115
        rgb[0, 3, 1] = 116
        mask = foreground_mask(frame_of(rgb, depth), baseline, SegThresholds())
        self.assertEqual(mask.tolist(), [[False, True, False, True]])


class SegmentTests(SimpleTestCase):
    def check_against_brute_force(self, rng, width, height):
        camera = top_down_camera('Cam2', (900.0, 0.0), width=width, height=height, focal=width * 0.9375)
        baseline, frame = random_pair(rng, width, height)
        cloud = segment(frame, baseline, SegThresholds(), camera)
        points, colours, pixels = brute_force_segment(frame, baseline, camera)
        self.assertEqual(cloud.pixels.tolist(), pixels)
        self.assertEqual(cloud.rgb.tolist(), colours)
        np.testing.assert_allclose(cloud.xyz, np.array(points).reshape(-1, 3), atol=1e-9)
        self.assertEqual(cloud.source_tick, frame.timestamp)

    def test_matches_brute_force_on_small_frames(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            self.check_against_brute_force(rng, 64, 48)

    def test_matches_brute_force_on_larger_frames(self):
        rng = np.random.default_rng(7)
        for width, height in [(160, 120), (160, 120), (640, 480)]:
            self.check_against_brute_force(rng, width, height)

    def test_matches_oracle_at_full_resolution(self):
        rng = np.random.default_rng(640)
        camera = top_down_camera('Cam2', (900.0, 0.0))
        for _ in range(100):
            baseline, frame = random_pair(rng, 640, 480)
            cloud = segment(frame, baseline, SegThresholds(), camera)
            points, colours, pixels = vectorised_segment(frame, baseline, camera)
            np.testing.assert_array_equal(cloud.pixels, pixels)
            np.testing.assert_array_equal(cloud.rgb, colours)
            np.testing.assert_allclose(cloud.xyz, points, atol=1e-9)

    def test_unchanged_frame_gives_empty_cloud(self):
        rng = np.random.default_rng(1)
        baseline, _ = random_pair(rng, 16, 12)
        frame = frame_of(baseline.baseline_rgb.copy(), baseline.baseline_depth_mm.copy())
        camera = top_down_camera('Cam2', (900.0, 0.0), width=16, height=12, focal=15.0)
        self.assertEqual(len(segment(frame, baseline, SegThresholds(), camera)), 0)

    def test_size_mismatch(self):
        rng = np.random.default_rng(1)
        baseline, _ = random_pair(rng, 16, 12)
        frame = frame_of(np.zeros((10, 16, 3), dtype=np.uint8), np.zeros((10, 16)))
        with self.assertRaises(FrameMismatchError):
            foreground_mask(frame, baseline, SegThresholds())


class PlyTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_vertex_lines(self):
        cloud = ColoredPointCloud(
            xyz=np.array([[1.0, 2.5, -3.0], [900.25, 0.0, 12.0]]),
            rgb=np.array([[1, 2, 3], [200, 40, 40]], dtype=np.uint8),
        )
        path = export_cloud(cloud, Path(self.tmp.name) / 'cloud.ply')
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'ply')
        self.assertIn('element vertex 2', lines)
        body = lines[lines.index('end_header') + 1:]
        self.assertEqual(body, ['1 2.5 -3 1 2 3', '900.25 0 12 200 40 40'])
        loaded = read_cloud(path)
        np.testing.assert_allclose(loaded.xyz, cloud.xyz)
        np.testing.assert_array_equal(loaded.rgb, cloud.rgb)

    def test_empty_cloud(self):
        path = export_cloud(ColoredPointCloud(), Path(self.tmp.name) / 'empty.ply')
        self.assertIn('element vertex 0', path.read_text().splitlines())
        self.assertEqual(len(read_cloud(path)), 0)

    def test_not_a_ply_file(self):
        path = Path(self.tmp.name) / 'notes.txt'
        path.write_text('hello\n')
        with self.assertRaises(ValueError):
            read_cloud(path)
