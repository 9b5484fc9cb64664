'''
Published benchmark figures kept as data: per-class and overall accuracy in
percent, the class counts of the inspection dataset and the per-model
latency statistics on an H200. Used by the consistency audit and by the
marginal reconstruction of response logs.
'''
from decimal import Decimal
from pathlib import Path

from cell.cellsim import GarmentClass
from classify.backends import INVALID_ANSWER
from classify.parsing import parse_text

from .exceptions import BenchError
from .logs import ResponseLog, ResponseRecord
from .manifest import DatasetRecord
from .metrics import CLASSES, round_half_up

CLASS_COUNTS = {'shirt': 38, 'sock': 64, 'trousers': 43, 'underwear': 12, 'other': 65, 'empty': 4}

# The stated image count; the class counts above add up to 226.
IMAGE_COUNT = 223

HARDWARE = 'H200'

ACCURACY_TABLE = {
    'gemma3:12b': {
        'overall': '76.23', 'shirt': '55.26', 'sock': '95.31', 'trousers': '67.44',
        'underwear': '50.00', 'other': '76.92', 'empty': '100.00',
    },
    'llama3.2-vision:90b': {
        'overall': '60.09', 'shirt': '18.42', 'sock': '87.50', 'trousers': '34.88',
        'underwear': '58.33', 'other': '73.85', 'empty': '25.00',
    },
    'llama4:16x17b': {
        'overall': '71.30', 'shirt': '31.58', 'sock': '89.06', 'trousers': '60.47',
        'underwear': '50.00', 'other': '89.23', 'empty': '0.00',
    },
    'llava:34b': {
        'overall': '50.67', 'shirt': '23.68', 'sock': '76.56', 'trousers': '2.33',
        'underwear': '41.67', 'other': '72.31', 'empty': '50.00',
    },
    'minicpm-v:8b': {
        'overall': '65.02', 'shirt': '71.05', 'sock': '95.31', 'trousers': '51.16',
        'underwear': '58.33', 'other': '43.08', 'empty': '50.00',
    },
    'qwen3-vl:235b': {
        'overall': '87.89', 'shirt': '97.37', 'sock': '100.00', 'trousers': '60.47',
        'underwear': '83.33', 'other': '93.85', 'empty': '25.00',
    },
    'qwen3-vl:8b': {
        'overall': '83.86', 'shirt': '86.84', 'sock': '93.75', 'trousers': '55.81',
        'underwear': '66.67', 'other': '95.38', 'empty': '50.00',
    },
    'qwen3.5:35b': {
        'overall': '87.89', 'shirt': '89.47', 'sock': '100.00', 'trousers': '76.74',
        'underwear': '75.00', 'other': '90.77', 'empty': '0.00',
    },
    'qwen3.5:122b': {
        'overall': '86.10', 'shirt': '73.68', 'sock': '98.44', 'trousers': '69.77',
        'underwear': '83.33', 'other': '95.38', 'empty': '25.00',
    },
}

# (mean, p10, p90) in seconds.
TIMING_TABLE = {
    'gemma3:12b': (0.653, 0.620, 0.689),
    'llama3.2-vision:90b': (0.953, 0.620, 0.690),
    'llama4:16x17b': (0.969, 0.904, 1.016),
    'qwen3-vl:235b': (2.444, 1.739, 3.072),
    'llava:34b': (0.409, 0.378, 0.411),
    'minicpm-v:8b': (0.461, 0.411, 0.534),
    'qwen3-vl:8b': (1.595, 0.993, 2.550),
    'qwen3.5:35b': (12.299, 2.807, 27.266),
    'qwen3.5:122b': (20.480, 3.892, 55.869),
}


def accuracy_row(model):
    try:
        return ACCURACY_TABLE[model]
    except KeyError:
        raise BenchError(f'no published accuracy row for {model!r}') from None


def count_discrepancy():
    return {'sum_of_class_counts': sum(CLASS_COUNTS.values()), 'image_count': IMAGE_COUNT}


def synthesize_latencies(mean_s, p10_s, p90_s, n=221):
    '''
    A sample whose mean and inclusive 10th/90th percentiles are exactly the
    given values: the lowest tenth sits at p10, the highest at p90 and the
    middle absorbs the mean. `n - 1` must be a multiple of 10.
    '''
    if n < 11 or (n - 1) % 10:
        raise BenchError('n - 1 must be a positive multiple of 10')
    j = (n - 1) // 10
    edge = j + 1
    middle_count = n - 2 * edge
    middle = (n * mean_s - edge * (p10_s + p90_s)) / middle_count
    if not p10_s <= middle <= p90_s:
        raise BenchError(f'mean {mean_s} cannot be reached between p10 {p10_s} and p90 {p90_s}')
    return [p10_s] * edge + [middle] * middle_count + [p90_s] * edge


def synthesize_log_from_accuracy_row(model, row=None, counts=None, latency_s=0.0):
    '''
    Marginal reconstruction of a response log: round(accuracy x count)
    correct answers per class, the rest answered `other` (or an invalid
    sentence for true `other`). Returns (dataset, log).
    '''
    row = row or accuracy_row(model)
    counts = counts or CLASS_COUNTS
    dataset, records = [], []
    for c in CLASSES:
        n = counts.get(c, 0)
        correct = round_half_up(Decimal(str(row[c])) / 100 * n) if n else 0
        wrong = GarmentClass.OTHER.value if c != GarmentClass.OTHER else INVALID_ANSWER
        for index in range(n):
            record_id = f'{c}-{index:03d}'
            dataset.append(DatasetRecord(record_id, Path('images') / f'{record_id}.png', GarmentClass(c)))
            raw = c if index < correct else wrong
            records.append(ResponseRecord(record_id, model, raw, parse_text(raw), latency_s))
    return dataset, ResponseLog(tuple(records))
