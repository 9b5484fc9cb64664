import threading

from django.test import SimpleTestCase

from cell.bus import ServiceBus, ServiceReply
from cell.exceptions import ConfigError, DuplicateCorrelationError, UnknownServiceError


class LogicalClockTests(SimpleTestCase):
    def setUp(self):
        self.bus = ServiceBus()
        self.addCleanup(self.bus.close)

    def test_reply_within_timeout(self):
        self.bus.register('classify', lambda payload: ServiceReply(payload.upper(), 0.5))
        result = self.bus.call('classify', 'sock', timeout_s=1.0)
        self.assertFalse(result.timed_out)
        self.assertEqual(result.payload, 'SOCK')
        self.assertEqual(result.elapsed_s, 0.5)

    def test_slow_reply_times_out(self):
        self.bus.register('classify', lambda payload: ServiceReply('sock', 2.0))
        result = self.bus.call('classify', None, timeout_s=1.0)
        self.assertTrue(result.timed_out)
        self.assertIsNone(result.payload)

    def test_plain_return_values_are_wrapped(self):
        self.bus.register('grasp', lambda payload: payload * 2)
        result = self.bus.call('grasp', 21, timeout_s=1.0)
        self.assertEqual((result.payload, result.elapsed_s, result.timed_out), (42, 0.0, False))

    def test_correlation_ids_count_per_service(self):
        self.bus.register('grasp', lambda payload: None)
        self.bus.register('segment', lambda payload: None)
        ids = [
            self.bus.call('grasp', None, 1.0).correlation_id,
            self.bus.call('segment', None, 1.0).correlation_id,
            self.bus.call('grasp', None, 1.0).correlation_id,
        ]
        self.assertEqual(ids, ['grasp-000001', 'segment-000001', 'grasp-000002'])

    def test_unknown_service(self):
        with self.assertRaises(UnknownServiceError):
            self.bus.call('weather', None, timeout_s=1.0)

    def test_envelope_is_delivered_once(self):
        self.bus.register('grasp', lambda payload: None)
        envelope = self.bus.envelope('grasp', None, 1.0)
        self.bus.call_service(envelope)
        with self.assertRaises(DuplicateCorrelationError):
            self.bus.call_service(envelope)

    def test_timeout_must_be_positive(self):
        with self.assertRaises(ConfigError):
            self.bus.envelope('grasp', None, 0.0)

    def test_unknown_clock(self):
        with self.assertRaises(ConfigError):
            ServiceBus(clock='sundial')


class WallClockTests(SimpleTestCase):
    def setUp(self):
        self.bus = ServiceBus(clock='wall')
        self.addCleanup(self.bus.close)
        self.release = threading.Event()
        self.addCleanup(self.release.set)

    def test_fast_handler(self):
        self.bus.register('grasp', lambda payload: ServiceReply(payload + 1))
        result = self.bus.call('grasp', 1, timeout_s=5.0)
        self.assertFalse(result.timed_out)
        self.assertEqual(result.payload, 2)

    def test_blocked_handler_times_out(self):
        self.bus.register('classify', lambda payload: self.release.wait(5.0))
        result = self.bus.call('classify', None, timeout_s=0.05)
        self.assertTrue(result.timed_out)
        self.assertIsNone(result.payload)
        self.assertGreater(result.elapsed_s, 0.04)
