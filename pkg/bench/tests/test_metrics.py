import math
import random
from fractions import Fraction
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from bench.exceptions import BenchError, CoverageError, EnsembleSpecError
from bench.logs import ResponseLog, ResponseRecord
from bench.manifest import DatasetRecord
from bench.metrics import (
    CLASSES, ConfusionMatrix, EnsembleSpec, confusion_matrix, ensemble_vote, macro_f1,
    overall_accuracy, per_class_accuracy, per_class_precision, round_half_up, timing_stats,
)
from cell.cellsim import GarmentClass
from classify.parsing import ParsedLabel, parse_text

HAND_LABELLED = [
    ('shirt', 'shirt'),
    ('shirt', 'other'),
    ('sock', 'sock'),
    ('sock', 'Sock'),
    ('sock', 'a sock'),
    ('trousers', 'trousers'),
    ('underwear', 'shirt'),
    ('other', 'other'),
    ('other', 'empty'),
    ('empty', 'empty'),
]


def labelled(pairs, model='gemma3:12b'):
    dataset, records = [], []
    for index, (true_class, raw) in enumerate(pairs):
        record_id = f'img-{index:03d}'
        dataset.append(DatasetRecord(record_id, Path(f'{record_id}.png'), GarmentClass(true_class)))
        records.append(ResponseRecord(record_id, model, raw, parse_text(raw), 0.5))
    return dataset, ResponseLog(tuple(records))


def diagonal(counts):
    grid = np.zeros((len(CLASSES), len(CLASSES) + 1), dtype=np.int64)
    for index, c in enumerate(CLASSES):
        grid[index, index] = counts.get(c, 0)
    return ConfusionMatrix(grid)


class ConfusionMatrixTests(SimpleTestCase):
    def setUp(self):
        self.dataset, self.log = labelled(HAND_LABELLED)
        self.matrix = confusion_matrix(self.log, self.dataset)

    def test_counts(self):
        self.assertEqual(self.matrix.total, 10)
        self.assertEqual(self.matrix.trace, 6)
        self.assertEqual(self.matrix.cell('sock', 'invalid'), 1)
        self.assertEqual(self.matrix.cell('shirt', 'other'), 1)
        self.assertEqual(self.matrix.cell('underwear', 'shirt'), 1)
        self.assertEqual(self.matrix.column_sum('empty'), 2)
        self.assertEqual(self.matrix.to_rows()['sock'], {
            'shirt': 0, 'sock': 2, 'trousers': 0, 'underwear': 0, 'other': 0, 'empty': 0, 'invalid': 1,
        })

    def test_accuracies(self):
        self.assertEqual(overall_accuracy(self.matrix), Fraction(3, 5))
        self.assertEqual(per_class_accuracy(self.matrix), {
            'shirt': Fraction(1, 2), 'sock': Fraction(2, 3), 'trousers': Fraction(1),
            'underwear': Fraction(0), 'other': Fraction(1, 2), 'empty': Fraction(1),
        })

    def test_precision_and_macro_f1(self):
        self.assertEqual(per_class_precision(self.matrix), {
            'shirt': Fraction(1, 2), 'sock': Fraction(1), 'trousers': Fraction(1),
            'underwear': None, 'other': Fraction(1, 2), 'empty': Fraction(1, 2),
        })
        self.assertEqual(macro_f1(self.matrix), Fraction(26, 45))

    def test_overall_is_the_count_weighted_class_mean(self):
        accuracy = per_class_accuracy(self.matrix)
        weighted = sum(self.matrix.row_sum(c) * accuracy[c] for c in CLASSES) / self.matrix.total
        self.assertEqual(weighted, overall_accuracy(self.matrix))

    def test_a_class_without_samples_has_no_accuracy(self):
        matrix = diagonal({'sock': 3, 'shirt': 1})
        accuracy = per_class_accuracy(matrix)
        self.assertIsNone(accuracy['empty'])
        self.assertEqual(accuracy['sock'], 1)
        self.assertEqual(macro_f1(matrix), 1)

    def test_identity_over_the_stated_image_count(self):
        matrix = diagonal({'shirt': 38, 'sock': 64, 'trousers': 43, 'underwear': 12, 'other': 62, 'empty': 4})
        self.assertEqual(matrix.total, 223)
        self.assertEqual(overall_accuracy(matrix), 1)

    def test_percent_rendering(self):
        self.assertEqual(f'{100 * float(Fraction(21, 38)):.2f}', '55.26')
        self.assertEqual(f'{100 * float(Fraction(171, 226)):.2f}', '75.66')

    def test_empty_dataset(self):
        matrix = confusion_matrix(ResponseLog(()), [])
        self.assertEqual(matrix.total, 0)
        with self.assertRaises(BenchError):
            overall_accuracy(matrix)
        self.assertIsNone(macro_f1(matrix))

    def test_log_must_cover_the_dataset(self):
        with self.assertRaises(CoverageError):
            confusion_matrix(ResponseLog(self.log.records[1:]), self.dataset)

    def test_shape_and_sign(self):
        with self.assertRaises(BenchError):
            ConfusionMatrix(np.zeros((6, 6)))
        with self.assertRaises(BenchError):
            ConfusionMatrix(-np.ones((6, 7)))

    def test_round_half_up(self):
        self.assertEqual([round_half_up(v) for v in (0.5, 1.5, 2.5, 169.9929, 2.4999)], [1, 2, 3, 170, 2])


class TimingStatsTests(SimpleTestCase):
    def test_linear_percentiles(self):
        stats = timing_stats([i / 100 for i in range(100, 0, -1)])
        self.assertAlmostEqual(stats.p10_s, 0.109)
        self.assertAlmostEqual(stats.p90_s, 0.901)
        self.assertAlmostEqual(stats.mean_s, 0.505)
        self.assertAlmostEqual(stats.median_s, 0.505)
        self.assertEqual(stats.n, 100)

    def test_single_latency(self):
        stats = timing_stats([0.653])
        self.assertEqual((stats.mean_s, stats.p10_s, stats.p90_s), (0.653, 0.653, 0.653))

    def test_percentiles_are_ordered(self):
        rng = random.Random(4)
        for _ in range(50):
            sample = [rng.lognormvariate(0, 1) for _ in range(rng.randint(1, 40))]
            stats = timing_stats(sample)
            self.assertLessEqual(min(sample), stats.p10_s + 1e-12)
            self.assertLessEqual(stats.p10_s, stats.median_s + 1e-12)
            self.assertLessEqual(stats.median_s, stats.p90_s + 1e-12)
            self.assertLessEqual(stats.p90_s, max(sample) + 1e-12)

    def test_percentiles_match_a_rank_interpolation(self):
        def percentile(sample, q):
            ordered = sorted(sample)
            rank = q * (len(ordered) - 1)
            low = math.floor(rank)
            high = min(low + 1, len(ordered) - 1)
            return ordered[low] + (ordered[high] - ordered[low]) * (rank - low)

        rng = random.Random(23)
        for _ in range(1000):
            sample = [rng.uniform(0.1, 30.0) for _ in range(rng.randint(1, 60))]
            stats = timing_stats(sample)
            self.assertAlmostEqual(stats.p10_s, percentile(sample, 0.1), places=9)
            self.assertAlmostEqual(stats.p90_s, percentile(sample, 0.9), places=9)

    def test_no_latencies(self):
        with self.assertRaises(BenchError):
            timing_stats([])


def member_log(model, answers, latency_s=1.0):
    return ResponseLog(tuple(
        ResponseRecord(f'img-{i:03d}', model, raw, parse_text(raw), latency_s)
        for i, raw in enumerate(answers)
    ))


def shirts(count):
    return [DatasetRecord(f'img-{i:03d}', Path(f'img-{i:03d}.png'), GarmentClass.SHIRT) for i in range(count)]


def expected_vote(labels, weights):
    tally = {}
    for label, weight in zip(labels, weights):
        if label.is_valid:
            tally[label.label.value] = tally.get(label.label.value, 0) + weight
    if not tally:
        reasons = {label.reason for label in labels}
        return ParsedLabel.invalid(reasons.pop() if len(reasons) == 1 else 'not_a_class')
    top = max(tally.values())
    return ParsedLabel.valid(next(c for c in CLASSES if tally.get(c) == top))


class EnsembleSpecTests(SimpleTestCase):
    def test_parse(self):
        spec = EnsembleSpec.parse('gemma3:12b=0.3, qwen3-vl:235b=0.4,llava:34b=0.3')
        self.assertEqual(spec.names, ['gemma3:12b', 'qwen3-vl:235b', 'llava:34b'])
        self.assertEqual([w for _, w in spec.normalized()], [Fraction(3, 10), Fraction(2, 5), Fraction(3, 10)])
        self.assertEqual(str(spec), 'gemma3:12b=0.3,qwen3-vl:235b=0.4,llava:34b=0.3')
        self.assertEqual([w for _, w in EnsembleSpec.parse('a=1,b=3').normalized()], [Fraction(1, 4), Fraction(3, 4)])

    def test_malformed(self):
        for text in ('', 'a', 'a=0.5,b', '=0.5', 'a=x', 'a=0.5,a=0.5', 'a=-1,b=2', 'a=0,b=0', None):
            with self.subTest(text=text), self.assertRaises(EnsembleSpecError):
                EnsembleSpec.parse(text)


class EnsembleVoteTests(SimpleTestCase):
    def test_weighted_majority(self):
        logs = [
            member_log('a', ['sock', 'shirt', 'trousers'], 0.5),
            member_log('b', ['shirt', 'shirt', 'underwear'], 1.0),
            member_log('c', ['sock', 'other', 'a shirt'], 2.0),
        ]
        result = ensemble_vote(logs, EnsembleSpec.parse('a=0.3,b=0.4,c=0.3'), shirts(3))
        self.assertEqual([r.parsed for r in result], [
            ParsedLabel.valid('sock'), ParsedLabel.valid('shirt'), ParsedLabel.valid('underwear'),
        ])
        self.assertEqual([r.raw for r in result], ['sock', 'shirt', 'underwear'])
        self.assertEqual({r.latency_s for r in result}, {3.5})
        self.assertEqual(result.model_name, 'ensemble(a=0.3,b=0.4,c=0.3)')

    def test_ties_go_to_the_earlier_class(self):
        logs = [member_log('a', ['trousers', 'empty']), member_log('b', ['shirt', 'other'])]
        result = ensemble_vote(logs, EnsembleSpec.parse('a=0.5,b=0.5'), shirts(2), model_name='pair')
        self.assertEqual([r.parsed for r in result], [ParsedLabel.valid('shirt'), ParsedLabel.valid('other')])
        self.assertEqual(result.model_name, 'pair')

    def test_all_members_invalid(self):
        logs = [member_log('a', ['a sock', 'socks']), member_log('b', ['two socks', 'a shirt'])]
        result = ensemble_vote(logs, EnsembleSpec.parse('a=0.5,b=0.5'), shirts(2))
        self.assertEqual([r.parsed for r in result], [
            ParsedLabel.invalid('multi_word'), ParsedLabel.invalid('not_a_class'),
        ])

    def test_invalid_answers_carry_no_weight(self):
        logs = [member_log('a', ['a shirt']), member_log('b', ['sock'])]
        result = ensemble_vote(logs, EnsembleSpec.parse('a=0.9,b=0.1'), shirts(1))
        self.assertEqual(result.records[0].parsed, ParsedLabel.valid('sock'))

    def test_members_may_share_one_log(self):
        combined = ResponseLog(member_log('a', ['sock']).records + member_log('b', ['shirt']).records)
        result = ensemble_vote([combined], EnsembleSpec.parse('a=0.6,b=0.4'), shirts(1))
        self.assertEqual(result.records[0].parsed, ParsedLabel.valid('sock'))

    def test_missing_member(self):
        with self.assertRaises(EnsembleSpecError):
            ensemble_vote([member_log('a', ['sock'])], EnsembleSpec.parse('a=0.5,b=0.5'), shirts(1))

    def test_matches_a_direct_tally(self):
        rng = random.Random(17)
        answers = list(CLASSES) + ['a sock', 'socks', '']
        columns = [[rng.choice(answers) for _ in range(300)] for _ in range(3)]
        spec = EnsembleSpec.parse('a=0.2,b=0.3,c=0.5')
        logs = [member_log(name, column) for name, column in zip('abc', columns)]
        result = ensemble_vote(logs, spec, shirts(300))
        weights = [w for _, w in spec.normalized()]
        for index, record in enumerate(result):
            labels = [parse_text(column[index]) for column in columns]
            self.assertEqual(record.parsed, expected_vote(labels, weights))
