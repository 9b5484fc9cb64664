'''
Strict scoring of classifier answers. An answer counts only if it is one of
the six class words, case ignored, with nothing else around it. Anything
else is an invalid label carrying the reason, never an exception.
'''
import math
from dataclasses import dataclass
from typing import Optional

from django.db import models

from cell.cellsim import CLASS_ORDER, GarmentClass

TRAILING_PUNCTUATION = '.,;:!?"\''

_CANONICAL = {c.value: c for c in CLASS_ORDER}


class InvalidReason(models.TextChoices):
    NOT_A_CLASS = 'not_a_class', 'Not a class'
    MULTI_WORD = 'multi_word', 'More than one word'
    EMPTY_TEXT = 'empty_text', 'Empty answer'
    TRANSPORT = 'transport', 'Transport failure'
    TIMEOUT = 'timeout', 'Timed out'


@dataclass(frozen=True)
class RawResponse:
    text: str
    latency_s: float
    model_name: str
    request_id: str

    def __post_init__(self):
        if not (math.isfinite(self.latency_s) and self.latency_s >= 0):
            raise ValueError(f'latency must be finite and non-negative, got {self.latency_s}')


@dataclass(frozen=True)
class ParsedLabel:
    label: Optional[GarmentClass] = None
    reason: Optional[InvalidReason] = None

    def __post_init__(self):
        if (self.label is None) == (self.reason is None):
            raise ValueError('a parsed label is either a class or an invalid reason')
        if self.label is not None:
            object.__setattr__(self, 'label', GarmentClass(self.label))
        else:
            object.__setattr__(self, 'reason', InvalidReason(self.reason))

    @classmethod
    def valid(cls, label):
        return cls(label=label)

    @classmethod
    def invalid(cls, reason):
        return cls(reason=reason)

    @property
    def is_valid(self):
        return self.label is not None

    def __str__(self):
        return self.label.value if self.is_valid else f'invalid:{self.reason.value}'

    @classmethod
    def from_string(cls, value):
        if value.startswith('invalid:'):
            return cls.invalid(value.split(':', 1)[1])
        return cls.valid(value)


def parse_text(text, lenient_punctuation=False):
    stripped = text.strip()
    if lenient_punctuation:
        stripped = stripped.rstrip(TRAILING_PUNCTUATION).lstrip('"\'').strip()
    if not stripped:
        return ParsedLabel.invalid(InvalidReason.EMPTY_TEXT)
    if len(stripped.split()) > 1:
        return ParsedLabel.invalid(InvalidReason.MULTI_WORD)
    # Only ASCII case is folded; lookalike letters stay distinct.
    match = _CANONICAL.get(stripped.lower()) if stripped.isascii() else None
    if match is None:
        return ParsedLabel.invalid(InvalidReason.NOT_A_CLASS)
    return ParsedLabel.valid(match)


def parse_response(raw, lenient_punctuation=False):
    return parse_text(raw.text, lenient_punctuation=lenient_punctuation)
