'''
Benchmark metrics over response logs. Accuracies are exact fractions; a
class without samples has no accuracy (None) rather than zero. Invalid
answers land in their own column and always count as wrong.
'''
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

import numpy as np
from sklearn.metrics import confusion_matrix as sk_confusion_matrix

from cell.cellsim import CLASS_ORDER
from classify.parsing import InvalidReason, ParsedLabel
from classify.profiles import INVALID, OUTCOMES

from .exceptions import BenchError, EnsembleSpecError
from .logs import ResponseLog, ResponseRecord

CLASSES = tuple(c.value for c in CLASS_ORDER)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts indexed [true class][predicted class or invalid], in CLASSES/OUTCOMES order."""
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (len(CLASSES), len(OUTCOMES)) or np.any(counts < 0):
            raise BenchError(f'confusion matrix must be {len(CLASSES)}x{len(OUTCOMES)} non-negative counts')
        counts.flags.writeable = False
        object.__setattr__(self, 'counts', counts)

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def trace(self):
        return int(np.trace(self.counts[:, :len(CLASSES)]))

    def row_sum(self, true_class):
        return int(self.counts[CLASSES.index(true_class)].sum())

    def column_sum(self, predicted):
        return int(self.counts[:, OUTCOMES.index(predicted)].sum())

    def cell(self, true_class, predicted):
        return int(self.counts[CLASSES.index(true_class), OUTCOMES.index(predicted)])

    def to_rows(self):
        return {c: dict(zip(OUTCOMES, row.tolist())) for c, row in zip(CLASSES, self.counts)}


def _outcome(label):
    return label.label.value if label.is_valid else INVALID


def confusion_matrix(log, dataset):
    records = log.covering(dataset)
    if not records:
        return ConfusionMatrix(np.zeros((len(CLASSES), len(OUTCOMES)), dtype=np.int64))
    y_true = [record.ground_truth.value for record in dataset]
    y_pred = [_outcome(response.parsed) for response in records]
    full = sk_confusion_matrix(y_true, y_pred, labels=list(OUTCOMES))
    # Nothing is ever truly `invalid`, so that row is dropped.
    return ConfusionMatrix(full[:len(CLASSES)])


def per_class_accuracy(matrix):
    accuracy = {}
    for c in CLASSES:
        total = matrix.row_sum(c)
        accuracy[c] = Fraction(matrix.cell(c, c), total) if total else None
    return accuracy


def overall_accuracy(matrix):
    if matrix.total == 0:
        raise BenchError('overall accuracy of an empty matrix')
    return Fraction(matrix.trace, matrix.total)


def per_class_precision(matrix):
    precision = {}
    for c in CLASSES:
        predicted = matrix.column_sum(c)
        precision[c] = Fraction(matrix.cell(c, c), predicted) if predicted else None
    return precision


def macro_f1(matrix):
    '''
    Mean F1 over the classes that occur in the dataset. A class that is never
    predicted scores F1 = 0.
    '''
    recall = per_class_accuracy(matrix)
    precision = per_class_precision(matrix)
    scores = []
    for c in CLASSES:
        if recall[c] is None:
            continue
        p = precision[c] or Fraction(0)
        r = recall[c]
        scores.append(2 * p * r / (p + r) if p + r else Fraction(0))
    if not scores:
        return None
    return sum(scores, Fraction(0)) / len(scores)


def round_half_up(value):
    return int(Decimal(str(value)).quantize(Decimal('1'), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class AuditFinding:
    model: str
    back_computed: int
    expected: int
    total: int
    per_class: dict

    @property
    def difference(self):
        return self.back_computed - self.expected

    @property
    def flagged(self):
        return abs(self.difference) >= 1

    def to_document(self):
        return {
            'model': self.model,
            'back_computed_correct': self.back_computed,
            'expected_correct': self.expected,
            'total': self.total,
            'difference': self.difference,
            'flagged': self.flagged,
            'per_class_correct': self.per_class,
        }


def audit_row(model, row, counts, total=None):
    '''
    Back-compute per-class correct counts from a published accuracy row
    (percent strings or numbers, keyed `overall` plus the classes) and
    compare their sum with the count the overall accuracy implies.
    '''
    total = sum(counts.values()) if total is None else total
    per_class = {
        c: round_half_up(Decimal(str(row[c])) / 100 * counts[c])
        for c in CLASSES if c in counts
    }
    expected = round_half_up(Decimal(str(row['overall'])) / 100 * total)
    return AuditFinding(model, sum(per_class.values()), expected, total, per_class)


def audit_table(table, counts, total=None):
    return [audit_row(model, row, counts, total) for model, row in table.items()]


def consistency_audit(table, counts, total=None):
    """Rows whose per-class accuracies do not add up to their overall accuracy."""
    return [finding for finding in audit_table(table, counts, total) if finding.flagged]


@dataclass(frozen=True)
class TimingStats:
    mean_s: float
    p10_s: float
    p90_s: float
    n: int
    median_s: float = 0.0

    def to_document(self):
        return {'mean_s': self.mean_s, 'p10_s': self.p10_s, 'p90_s': self.p90_s, 'median_s': self.median_s, 'n': self.n}


def timing_stats(latencies):
    '''
    Mean and inclusive linear-interpolation percentiles: rank q * (n - 1) on
    the sorted sample, interpolated between its neighbours.
    '''
    sample = np.asarray(list(latencies), dtype=np.float64)
    if sample.size == 0:
        raise BenchError('timing statistics need at least one latency')
    p10, p50, p90 = np.percentile(sample, [10, 50, 90], method='linear')
    return TimingStats(
        mean_s=math.fsum(sample.tolist()) / sample.size,
        p10_s=float(p10),
        p90_s=float(p90),
        n=int(sample.size),
        median_s=float(p50),
    )


@dataclass(frozen=True)
class EnsembleSpec:
    members: tuple

    def __post_init__(self):
        members = tuple((str(name), Fraction(weight)) for name, weight in self.members)
        if not members:
            raise EnsembleSpecError('an ensemble needs at least one member')
        names = [name for name, _ in members]
        if len(set(names)) != len(names):
            raise EnsembleSpecError(f'ensemble names a member twice: {names}')
        if any(weight < 0 for _, weight in members):
            raise EnsembleSpecError('ensemble weights must be non-negative')
        if sum(weight for _, weight in members) == 0:
            raise EnsembleSpecError('ensemble weights must not all be zero')
        object.__setattr__(self, 'members', members)

    @classmethod
    def parse(cls, text):
        """`"gemma3:12b=0.3,qwen3-vl:235b=0.4"`; weights are decimal numbers."""
        members = []
        for part in (text or '').split(','):
            name, sep, weight = part.strip().rpartition('=')
            if not sep or not name.strip():
                raise EnsembleSpecError(f'expected name=weight, got {part.strip()!r}')
            try:
                members.append((name.strip(), Fraction(weight.strip())))
            except (ValueError, ZeroDivisionError):
                raise EnsembleSpecError(f'weight of {name.strip()!r} is not a number: {weight!r}') from None
        return cls(tuple(members))

    @property
    def names(self):
        return [name for name, _ in self.members]

    def normalized(self):
        total = sum(weight for _, weight in self.members)
        return [(name, weight / total) for name, weight in self.members]

    def __str__(self):
        return ','.join(f'{name}={float(weight):g}' for name, weight in self.members)


def _vote(labels, raws, weights):
    tally = {}
    for label, weight in zip(labels, weights):
        if label.is_valid:
            tally[label.label.value] = tally.get(label.label.value, Fraction(0)) + weight
    if not tally:
        reasons = {label.reason for label in labels}
        reason = reasons.pop() if len(reasons) == 1 else InvalidReason.NOT_A_CLASS
        return ParsedLabel.invalid(reason), raws[max(range(len(weights)), key=lambda i: (weights[i], -i))]
    # Ties go to the earlier class in CLASS_ORDER.
    best = max(CLASSES, key=lambda c: (tally.get(c, Fraction(-1)), -CLASSES.index(c)))
    voters = [i for i, label in enumerate(labels) if label.is_valid and label.label.value == best]
    return ParsedLabel.valid(best), raws[max(voters, key=lambda i: (weights[i], -i))]


def ensemble_vote(logs, spec, dataset, model_name=None):
    '''
    Weighted hard vote per record. Invalid member answers carry no weight;
    if every member is invalid the result is invalid too. The ensemble's
    latency is the sum of its members' latencies.
    '''
    by_model = {}
    for log in logs:
        for model in log.models:
            by_model[model] = log.for_model(model)
    missing = [name for name in spec.names if name not in by_model]
    if missing:
        raise EnsembleSpecError(f'no response log for ensemble member(s) {missing}')
    members = spec.normalized()
    weights = [weight for _, weight in members]
    covered = [by_model[name].covering(dataset) for name, _ in members]
    model_name = model_name or f'ensemble({spec})'

    records = []
    for index, record in enumerate(dataset):
        responses = [member[index] for member in covered]
        label, raw = _vote([r.parsed for r in responses], [r.raw for r in responses], weights)
        records.append(ResponseRecord(
            id=record.id,
            model=model_name,
            raw=raw,
            parsed=label,
            latency_s=math.fsum(r.latency_s for r in responses),
            hardware=responses[0].hardware,
        ))
    return ResponseLog(tuple(records))
