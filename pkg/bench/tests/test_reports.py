import json
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from bench.metrics import CLASSES, ConfusionMatrix, TimingStats, confusion_matrix, timing_stats
from bench.reference import CLASS_COUNTS, synthesize_log_from_accuracy_row
from bench.reports import ModelReport, emit_report, model_slug, render_markdown


def identity_matrix(counts=CLASS_COUNTS):
    grid = np.zeros((len(CLASSES), len(CLASSES) + 1), dtype=np.int64)
    for index, c in enumerate(CLASSES):
        grid[index, index] = counts.get(c, 0)
    return ConfusionMatrix(grid)


def gemma_report():
    dataset, log = synthesize_log_from_accuracy_row('gemma3:12b')
    return ModelReport(
        'gemma3:12b', confusion_matrix(log, dataset),
        TimingStats(mean_s=0.653, p10_s=0.62, p90_s=0.689, n=226), 'H200',
    )


class ReportTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_markdown(self):
        text = render_markdown([ModelReport('perfect', identity_matrix()), gemma_report()])
        lines = text.splitlines()
        self.assertEqual(lines[0], '# Classifier benchmark')
        self.assertIn('| Model | Overall | Shirt | Sock | Trousers | Underwear | Other | Empty |', lines)
        self.assertIn('| Image Count | 226 | 38 | 64 | 43 | 12 | 65 | 4 |', lines)
        self.assertIn('| perfect | ' + ' | '.join(['100.00%'] * 7) + ' |', lines)
        gemma = next(line for line in lines if line.startswith('| gemma3:12b | 75.66%'))
        self.assertIn('55.26%', gemma)
        self.assertIn('| gemma3:12b | H200 | 0.653 | 0.620 | 0.689 |', lines)

    def test_missing_class_renders_as_not_available(self):
        text = render_markdown([ModelReport('m', identity_matrix({'sock': 2}))])
        self.assertIn('| m | 100.00% | n/a | 100.00% | n/a | n/a | n/a | n/a |', text)
        self.assertNotIn('Computation time', text)

    def test_files(self):
        reports = [gemma_report(), ModelReport('qwen3-vl:235b', identity_matrix({'sock': 2}))]
        written = emit_report(reports, self.root, audit={'class_counts': CLASS_COUNTS})
        names = {path.name for path in written}
        self.assertEqual(names, {
            'report.md', 'table1.csv', 'table2.csv', 'report.json', 'audit.json',
            'confusion_gemma3_12b.csv', 'confusion_gemma3_12b.svg',
            'confusion_qwen3-vl_235b.csv', 'confusion_qwen3-vl_235b.svg',
        })

        table1 = pd.read_csv(self.root / 'table1.csv', float_precision='round_trip')
        self.assertEqual(list(table1.columns), ['model', 'overall', *CLASSES])
        self.assertEqual(table1.loc[0, 'overall'], 171 / 226)
        self.assertEqual(table1.loc[0, 'shirt'], 21 / 38)
        self.assertTrue(np.isnan(table1.loc[1, 'shirt']))

        table2 = pd.read_csv(self.root / 'table2.csv', float_precision='round_trip')
        self.assertEqual(list(table2['model']), ['gemma3:12b'])
        self.assertEqual(table2.loc[0, 'p90_s'], 0.689)

        confusion = pd.read_csv(self.root / 'confusion_gemma3_12b.csv', index_col='true')
        self.assertEqual(confusion.loc['trousers', 'other'], 14)
        self.assertEqual(int(confusion.to_numpy().sum()), 226)

        document = json.loads((self.root / 'report.json').read_text())
        self.assertIsNone(document['models'][1]['accuracy']['shirt'])
        self.assertEqual(document['models'][0]['timing']['n'], 226)
        self.assertEqual(json.loads((self.root / 'audit.json').read_text()), {'class_counts': CLASS_COUNTS})

    def test_heatmap_has_one_square_per_cell(self):
        emit_report([ModelReport('m', identity_matrix())], self.root, formats=('csv',))
        svg = (self.root / 'confusion_m.svg').read_text()
        self.assertEqual(svg.count('id="cell-'), 42)
        self.assertIn('id="cell-5-6"', svg)

    def test_reruns_are_byte_identical(self):
        reports = [gemma_report(), ModelReport('m', identity_matrix(), timing_stats([0.5, 1.0]))]
        first = emit_report(reports, self.root / 'first')
        second = emit_report(reports, self.root / 'second')
        for a, b in zip(first, second):
            with self.subTest(file=a.name):
                self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_formats(self):
        written = emit_report([ModelReport('m', identity_matrix())], self.root, formats=('md',))
        self.assertEqual([path.name for path in written], ['report.md'])

    def test_model_slug(self):
        self.assertEqual(model_slug('qwen3-vl:235b'), 'qwen3-vl_235b')
        self.assertEqual(model_slug('ensemble(a=0.5,b=0.5)'), 'ensemble_a_0.5_b_0.5_')
