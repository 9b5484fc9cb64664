'''
Dataset manifests: one JSON object per line, `{"id", "image", "label"}`.
Image paths are resolved against the manifest's directory.
'''
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from cell.cellsim import CLASS_ORDER, GarmentClass

from .exceptions import DuplicateRecordError, ManifestError, UnknownLabelError


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    image: Path
    ground_truth: GarmentClass

    def to_document(self):
        return {'id': self.id, 'image': str(self.image), 'label': self.ground_truth.value}


def load_manifest(path):
    path = Path(path)
    if not path.exists():
        raise ManifestError(f'manifest {path} does not exist')
    labels = {c.value: c for c in CLASS_ORDER}
    records, seen = [], set()
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            record_id, image, label = str(entry['id']), entry['image'], entry['label']
        except json.JSONDecodeError as exc:
            raise ManifestError(f'not valid JSON ({exc.msg})', line=number) from None
        except (KeyError, TypeError) as exc:
            raise ManifestError(f'missing field {exc}', line=number) from None
        if label not in labels:
            raise UnknownLabelError(f'unknown label {label!r}', line=number)
        if record_id in seen:
            raise DuplicateRecordError(f'duplicate id {record_id!r}', line=number)
        seen.add(record_id)
        records.append(DatasetRecord(record_id, path.parent / image, labels[label]))
    return records


def write_manifest(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(''.join(json.dumps(r.to_document()) + '\n' for r in records))
    return path


def class_counts(dataset):
    counts = Counter(record.ground_truth.value for record in dataset)
    return {c.value: counts.get(c.value, 0) for c in CLASS_ORDER}
