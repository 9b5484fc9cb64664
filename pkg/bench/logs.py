'''
Response logs: one line per (record id, model) with the raw answer, the
parsed label and the latency. Lines keep the key order
`id, model, raw, parsed, latency_s[, hardware]` so logs diff cleanly.
'''
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from classify.parsing import ParsedLabel, parse_text

from .exceptions import BenchError, CoverageError, DuplicateRecordError


@dataclass(frozen=True)
class ResponseRecord:
    id: str
    model: str
    raw: str
    parsed: ParsedLabel
    latency_s: float
    hardware: Optional[str] = None

    def __post_init__(self):
        if not (math.isfinite(self.latency_s) and self.latency_s >= 0):
            raise BenchError(f'{self.id}: latency must be finite and non-negative')

    def to_document(self):
        document = {
            'id': self.id,
            'model': self.model,
            'raw': self.raw,
            'parsed': str(self.parsed),
            'latency_s': self.latency_s,
        }
        if self.hardware:
            document['hardware'] = self.hardware
        return document


@dataclass(frozen=True)
class ResponseLog:
    records: tuple

    def __post_init__(self):
        object.__setattr__(self, 'records', tuple(self.records))
        seen = set()
        for record in self.records:
            key = (record.id, record.model)
            if key in seen:
                raise DuplicateRecordError(f'two responses for {record.id!r} from {record.model!r}')
            seen.add(key)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def models(self):
        return sorted({record.model for record in self.records})

    @property
    def model_name(self):
        models = self.models
        if len(models) != 1:
            raise BenchError(f'log holds {len(models)} models: {models}')
        return models[0]

    def by_id(self):
        return {record.id: record for record in self.records}

    def labels(self):
        return [record.parsed for record in self.records]

    def for_model(self, model):
        return ResponseLog(tuple(r for r in self.records if r.model == model))

    def covering(self, dataset):
        '''
        Records in dataset order. Raises CoverageError when an id is missing
        or the log holds ids the dataset does not.
        '''
        by_id = self.by_id()
        if len(by_id) != len(self.records):
            raise CoverageError('log holds several responses for one id')
        missing = [record.id for record in dataset if record.id not in by_id]
        extra = sorted(set(by_id) - {record.id for record in dataset})
        if missing or extra:
            raise CoverageError(f'log does not cover the dataset: missing {missing[:5]}, extra {extra[:5]}')
        return [by_id[record.id] for record in dataset]


def dumps_log(log):
    return ''.join(json.dumps(record.to_document()) + '\n' for record in log)


def write_log(log, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_log(log))
    return path


def read_log(path, lenient_punctuation=False):
    '''
    Load a response log. Lines without a `parsed` field are parsed from
    their raw text.
    '''
    path = Path(path)
    if not path.exists():
        raise BenchError(f'response log {path} does not exist')
    records = []
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            parsed = entry.get('parsed')
            records.append(ResponseRecord(
                id=str(entry['id']),
                model=entry['model'],
                raw=entry['raw'],
                parsed=(
                    ParsedLabel.from_string(parsed) if parsed
                    else parse_text(entry['raw'], lenient_punctuation=lenient_punctuation)
                ),
                latency_s=float(entry['latency_s']),
                hardware=entry.get('hardware'),
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise BenchError(f'{path}:{number}: {exc}') from None
    return ResponseLog(tuple(records))
