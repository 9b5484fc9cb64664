'''
Confusion profiles and latency models for the mock classifier. A profile
holds, per true class, a probability row over the six classes plus an
`invalid` outcome.
'''
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cell.cellsim import CLASS_ORDER, GarmentClass

from .exceptions import ProfileError

INVALID = 'invalid'
OUTCOMES = tuple(c.value for c in CLASS_ORDER) + (INVALID,)

# z-score of the 90th percentile of a standard normal.
_Z90 = 1.2815515655446004


@dataclass(frozen=True)
class ConfusionProfile:
    rows: dict

    def __post_init__(self):
        rows = {}
        for true_class in CLASS_ORDER:
            try:
                row = np.asarray(self.rows[true_class.value], dtype=np.float64)
            except KeyError:
                raise ProfileError(f'profile has no row for {true_class.value!r}') from None
            if row.shape != (len(OUTCOMES),):
                raise ProfileError(f'row {true_class.value!r} needs {len(OUTCOMES)} entries')
            if np.any(row < 0) or abs(math.fsum(row.tolist()) - 1.0) > 1e-9:
                raise ProfileError(f'row {true_class.value!r} is not a probability distribution')
            rows[true_class.value] = tuple(row.tolist())
        object.__setattr__(self, 'rows', rows)

    def row(self, true_class):
        try:
            return self.rows[GarmentClass(true_class).value]
        except ValueError:
            raise ProfileError(f'unknown true class {true_class!r}') from None

    @classmethod
    def uniform(cls, correct):
        """`correct` on the diagonal, the remainder spread evenly over the other outcomes."""
        return cls.from_accuracy_row({c.value: correct for c in CLASS_ORDER})

    @classmethod
    def identity(cls):
        return cls.uniform(1.0)

    @classmethod
    def from_accuracy_row(cls, accuracies):
        if not all(0.0 <= a <= 1.0 for a in accuracies.values()):
            raise ProfileError('accuracies must lie in [0, 1]')
        rest = len(OUTCOMES) - 1
        rows = {}
        for true_class in CLASS_ORDER:
            correct = float(accuracies[true_class.value])
            rows[true_class.value] = [
                correct if outcome == true_class.value else (1.0 - correct) / rest
                for outcome in OUTCOMES
            ]
        return cls(rows)

    @classmethod
    def from_document(cls, document):
        rows = {}
        for true_class, entries in document.get('rows', {}).items():
            unknown = set(entries) - set(OUTCOMES)
            if unknown:
                raise ProfileError(f'row {true_class!r} names unknown outcomes {sorted(unknown)}')
            rows[true_class] = [float(entries.get(outcome, 0.0)) for outcome in OUTCOMES]
        return cls(rows)

    def to_document(self):
        return {
            'rows': {
                true_class: {o: p for o, p in zip(OUTCOMES, row) if p}
                for true_class, row in self.rows.items()
            }
        }


@dataclass(frozen=True)
class LatencyModel:
    mean_s: float
    p10_s: float
    p90_s: float

    def __post_init__(self):
        if not (0 <= self.p10_s <= self.p90_s and self.mean_s >= 0):
            raise ProfileError('latency model needs 0 <= p10 <= p90 and a non-negative mean')

    @property
    def sigma(self):
        return (self.p90_s - self.p10_s) / (2 * _Z90)

    def draw(self, rng):
        return max(0.0, float(rng.normal(self.mean_s, self.sigma)))

    def to_document(self):
        return {'mean_s': self.mean_s, 'p10_s': self.p10_s, 'p90_s': self.p90_s}


DEFAULT_LATENCY = LatencyModel(0.653, 0.620, 0.689)


def load_profile(path):
    '''
    Read a profile file. Returns the profile and the latency model stored next
    to it, or the default one.
    '''
    try:
        document = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ProfileError(f'profile file {path} does not exist') from None
    except json.JSONDecodeError as exc:
        raise ProfileError(f'{path}: {exc}') from None
    latency = document.get('latency')
    return (
        ConfusionProfile.from_document(document),
        LatencyModel(**latency) if latency else DEFAULT_LATENCY,
    )


def save_profile(profile, path, latency=None):
    document = profile.to_document()
    if latency is not None:
        document['latency'] = latency.to_document()
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + '\n')
