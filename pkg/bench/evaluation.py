'''
Offline evaluation: every manifest record goes through one classifier call
and the answer is parsed strictly. Calls may fan out over worker threads;
the log always comes back in manifest order.
'''
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from classify.exceptions import ClassifierError, ClassifierTimeout, UnknownRequestError
from classify.parsing import InvalidReason, ParsedLabel, parse_response
from classify.prompts import ImagePayload, build_prompt

from .exceptions import BenchError
from .logs import ResponseLog, ResponseRecord

logger = logging.getLogger(__name__)

# Answers that never reached the parser; left out of latency statistics.
FAILED_REASONS = (InvalidReason.TRANSPORT, InvalidReason.TIMEOUT)


@dataclass(frozen=True)
class EvaluationResult:
    log: ResponseLog
    errors: list = field(default_factory=list)

    @property
    def failed(self):
        return len(self.errors)

    def error_summary(self):
        counts = {}
        for _, reason, _ in self.errors:
            counts[reason] = counts.get(reason, 0) + 1
        return ', '.join(f'{count} {reason}' for reason, count in sorted(counts.items()))


def _image_for(record, backend):
    png = record.image.read_bytes() if backend.reads_images else b''
    return ImagePayload(record.id, png, record.ground_truth.value)


def _evaluate_one(backend, request, record, lenient_punctuation, hardware):
    try:
        image = _image_for(record, backend)
        raw = backend.classify(image, request)
    except ClassifierTimeout as exc:
        return _failed(backend, record, InvalidReason.TIMEOUT, hardware), (record.id, 'timeout', str(exc))
    except (ClassifierError, OSError) as exc:
        return _failed(backend, record, InvalidReason.TRANSPORT, hardware), (record.id, 'transport', str(exc))
    parsed = parse_response(raw, lenient_punctuation=lenient_punctuation)
    return ResponseRecord(record.id, backend.model_name, raw.text, parsed, raw.latency_s, hardware), None


def _failed(backend, record, reason, hardware):
    return ResponseRecord(record.id, backend.model_name, '', ParsedLabel.invalid(reason), 0.0, hardware)


def evaluate(backend, dataset, concurrency=1, request=None, lenient_punctuation=False, hardware=None):
    if concurrency < 1:
        raise BenchError('concurrency must be at least 1')
    missing = backend.missing_requests([record.id for record in dataset])
    if missing:
        shown = ', '.join(missing[:5]) + (', ...' if len(missing) > 5 else '')
        raise UnknownRequestError(
            f'{backend.model_name}: no recorded response for {len(missing)} of {len(dataset)} records ({shown})'
        )
    request = request or build_prompt(model_name=backend.model_name)
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        results = list(pool.map(
            lambda record: _evaluate_one(backend, request, record, lenient_punctuation, hardware),
            dataset,
        ))
    errors = [error for _, error in results if error is not None]
    for record_id, reason, message in errors:
        logger.warning('%s: %s (%s)', record_id, reason, message)
    logger.info('evaluated %d records with %s, %d failed', len(dataset), backend.model_name, len(errors))
    return EvaluationResult(ResponseLog(tuple(record for record, _ in results)), errors)


def answered_latencies(log):
    return [record.latency_s for record in log if record.parsed.reason not in FAILED_REASONS]
