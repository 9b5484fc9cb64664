from decimal import Decimal

from django.test import SimpleTestCase

from bench.evaluation import answered_latencies
from bench.exceptions import BenchError
from bench.metrics import (
    audit_row, audit_table, confusion_matrix, consistency_audit, overall_accuracy,
    per_class_accuracy, timing_stats,
)
from bench.reference import (
    ACCURACY_TABLE, CLASS_COUNTS, IMAGE_COUNT, TIMING_TABLE, accuracy_row, count_discrepancy,
    synthesize_latencies, synthesize_log_from_accuracy_row,
)


class AuditTests(SimpleTestCase):
    def test_stated_counts_do_not_add_up(self):
        self.assertEqual(count_discrepancy(), {'sum_of_class_counts': 226, 'image_count': 223})

    def test_gemma_row_is_one_off(self):
        finding = audit_row('gemma3:12b', ACCURACY_TABLE['gemma3:12b'], CLASS_COUNTS, total=IMAGE_COUNT)
        self.assertEqual(finding.per_class, {
            'shirt': 21, 'sock': 61, 'trousers': 29, 'underwear': 6, 'other': 50, 'empty': 4,
        })
        self.assertEqual((finding.back_computed, finding.expected, finding.total), (171, 170, 223))
        self.assertTrue(finding.flagged)
        self.assertEqual(finding.to_document()['difference'], 1)

    def test_flagged_rows(self):
        flagged = {f.model: f for f in consistency_audit(ACCURACY_TABLE, CLASS_COUNTS, total=IMAGE_COUNT)}
        self.assertIn('gemma3:12b', flagged)
        self.assertIn('qwen3-vl:235b', flagged)
        self.assertEqual((flagged['qwen3-vl:235b'].back_computed, flagged['qwen3-vl:235b'].expected), (199, 196))
        for model in ('llava:34b', 'llama3.2-vision:90b', 'llama4:16x17b'):
            self.assertNotIn(model, flagged)

    def test_every_row_is_audited(self):
        findings = audit_table(ACCURACY_TABLE, CLASS_COUNTS, total=IMAGE_COUNT)
        self.assertEqual([f.model for f in findings], list(ACCURACY_TABLE))

    def test_consistent_row_is_not_flagged(self):
        counts = {'shirt': 10, 'sock': 10}
        row = {'overall': '75.00', 'shirt': '50.00', 'sock': '100.00'}
        self.assertEqual(consistency_audit({'made-up': row}, counts), [])
        self.assertEqual(audit_row('made-up', row, counts).total, 20)

    def test_unknown_model(self):
        with self.assertRaises(BenchError):
            accuracy_row('gpt-4o')


class SyntheticLogTests(SimpleTestCase):
    def test_reproduces_the_published_class_accuracies(self):
        dataset, log = synthesize_log_from_accuracy_row('qwen3-vl:235b')
        self.assertEqual(len(dataset), 226)
        accuracy = per_class_accuracy(confusion_matrix(log, dataset))
        for c, published in ACCURACY_TABLE['qwen3-vl:235b'].items():
            if c == 'overall':
                continue
            with self.subTest(c=c):
                self.assertLessEqual(abs(Decimal(100 * float(accuracy[c])) - Decimal(published)), Decimal('0.01'))

    def test_gemma_back_computation(self):
        dataset, log = synthesize_log_from_accuracy_row('gemma3:12b')
        matrix = confusion_matrix(log, dataset)
        self.assertEqual((matrix.trace, matrix.total), (171, 226))
        self.assertEqual(f'{100 * float(overall_accuracy(matrix)):.2f}', '75.66')
        self.assertEqual(f"{100 * float(per_class_accuracy(matrix)['shirt']):.2f}", '55.26')

    def test_wrong_answers(self):
        dataset, log = synthesize_log_from_accuracy_row('llava:34b')
        matrix = confusion_matrix(log, dataset)
        self.assertEqual(matrix.cell('trousers', 'other'), 42)
        self.assertEqual(matrix.cell('other', 'invalid'), 18)


class SyntheticLatencyTests(SimpleTestCase):
    def test_published_statistics_are_reproduced(self):
        for model in ('gemma3:12b', 'qwen3-vl:235b', 'qwen3.5:122b', 'minicpm-v:8b'):
            mean_s, p10_s, p90_s = TIMING_TABLE[model]
            with self.subTest(model=model):
                stats = timing_stats(synthesize_latencies(mean_s, p10_s, p90_s))
                self.assertAlmostEqual(stats.mean_s, mean_s, places=9)
                self.assertAlmostEqual(stats.p10_s, p10_s, places=9)
                self.assertAlmostEqual(stats.p90_s, p90_s, places=9)

    def test_mean_outside_the_band(self):
        # This row's mean lies above its 90th percentile.
        with self.assertRaises(BenchError):
            synthesize_latencies(*TIMING_TABLE['llama3.2-vision:90b'])
        with self.assertRaises(BenchError):
            synthesize_latencies(0.5, 0.4, 0.6, n=100)

    def test_synthetic_log_latencies_are_answered(self):
        _, log = synthesize_log_from_accuracy_row('gemma3:12b', latency_s=0.653)
        self.assertEqual(len(answered_latencies(log)), 226)
