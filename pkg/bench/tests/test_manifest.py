import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from bench.exceptions import DuplicateRecordError, ManifestError, UnknownLabelError
from bench.manifest import DatasetRecord, class_counts, load_manifest, write_manifest
from cell.cellsim import GarmentClass


class ManifestTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        self.path = self.root / 'data' / 'manifest.jsonl'
        self.path.parent.mkdir()

    def write(self, *lines):
        self.path.write_text(''.join(
            (line if isinstance(line, str) else json.dumps(line)) + '\n' for line in lines
        ))

    def test_load(self):
        self.write(
            {'id': 'img-001', 'image': 'images/img-001.png', 'label': 'sock'},
            '',
            {'id': 'img-002', 'image': 'images/img-002.png', 'label': 'empty'},
        )
        records = load_manifest(self.path)
        self.assertEqual([r.id for r in records], ['img-001', 'img-002'])
        self.assertEqual(records[0].image, self.path.parent / 'images' / 'img-001.png')
        self.assertEqual(records[1].ground_truth, GarmentClass.EMPTY)

    def test_empty_manifest(self):
        self.write()
        self.assertEqual(load_manifest(self.path), [])

    def test_unknown_label_names_the_line(self):
        self.write(
            {'id': 'img-001', 'image': 'a.png', 'label': 'sock'},
            {'id': 'img-002', 'image': 'b.png', 'label': 'socks'},
        )
        with self.assertRaises(UnknownLabelError) as caught:
            load_manifest(self.path)
        self.assertEqual(caught.exception.line, 2)
        self.assertTrue(str(caught.exception).startswith('line 2: '))
        self.assertIn("'socks'", str(caught.exception))

    def test_duplicate_id(self):
        self.write(
            {'id': 'img-001', 'image': 'a.png', 'label': 'sock'},
            {'id': 'img-001', 'image': 'b.png', 'label': 'shirt'},
        )
        with self.assertRaises(DuplicateRecordError) as caught:
            load_manifest(self.path)
        self.assertEqual(caught.exception.line, 2)

    def test_malformed_lines(self):
        for line in ('{"id": "img-001",', json.dumps({'id': 'img-001', 'label': 'sock'}), '[1, 2]'):
            self.write(line)
            with self.subTest(line=line), self.assertRaises(ManifestError) as caught:
                load_manifest(self.path)
            self.assertEqual(caught.exception.line, 1)

    def test_missing_manifest(self):
        with self.assertRaises(ManifestError) as caught:
            load_manifest(self.root / 'missing.jsonl')
        self.assertIsNone(caught.exception.line)

    def test_write_and_count(self):
        records = [
            DatasetRecord('a', Path('a.png'), GarmentClass.SOCK),
            DatasetRecord('b', Path('b.png'), GarmentClass.SOCK),
            DatasetRecord('c', Path('c.png'), GarmentClass.OTHER),
        ]
        path = write_manifest(records, self.root / 'out' / 'manifest.jsonl')
        loaded = load_manifest(path)
        self.assertEqual([(r.id, r.ground_truth) for r in loaded], [(r.id, r.ground_truth) for r in records])
        self.assertEqual(
            class_counts(loaded),
            {'shirt': 0, 'sock': 2, 'trousers': 0, 'underwear': 0, 'other': 1, 'empty': 0},
        )
