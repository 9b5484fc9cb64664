'''
Run configuration. Values come from `settings.SORTCELL`, then an optional
config document (JSON or TOML), then command-line flags; the merged result is
validated by CellConfigSerializer before anything runs.
'''
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from django.conf import settings

from classify.backends import BackendDescriptor

from .cellsim import SceneSpec
from .exceptions import ConfigError
from .segmentation import SegThresholds

try:
    import tomllib
except ImportError:  # Python < 3.11
    tomllib = None


@dataclass(frozen=True)
class RunConfig:
    scene: SceneSpec
    backend: BackendDescriptor
    seed: int = 0
    thresholds: SegThresholds = field(default_factory=SegThresholds)
    candidate_budget: int = 5
    pick_budget: int = 3
    max_transitions: int = 20000
    classify_timeout_s: float = 30.0
    grasp_timeout_s: float = 2.0
    segment_timeout_s: float = 5.0
    baseline_frames: int = 5
    spread_factor: float = 1.5
    tactile_gain: float = 0.5
    tactile_min_delta: float = 1.0
    tactile_channels: int = 4
    min_grasp_height_mm: float = 5.0
    bbox_margin_px: int = 4
    pick_failure_rate: float = 0.0
    lenient_punctuation: bool = False
    export_twin: bool = True
    out: Optional[str] = None


def settings_defaults():
    values = settings.SORTCELL
    return {
        'seed': 0,
        'backend': {
            'kind': 'mock',
            'model_name': values['MODEL_NAME'],
            'timeout_s': values['CLASSIFY_TIMEOUT_S'],
        },
        'thresholds': {
            'depth_delta_mm': values['DEPTH_DELTA_MM'],
            'rgb_delta': values['RGB_DELTA'],
        },
        'candidate_budget': values['CANDIDATE_BUDGET'],
        'pick_budget': values['PICK_BUDGET'],
        'max_transitions': values['MAX_TRANSITIONS'],
        'classify_timeout_s': values['CLASSIFY_TIMEOUT_S'],
        'grasp_timeout_s': values['GRASP_TIMEOUT_S'],
        'segment_timeout_s': values['SEGMENT_TIMEOUT_S'],
        'baseline_frames': values['BASELINE_FRAMES'],
        'spread_factor': values['SPREAD_FACTOR'],
        'tactile_gain': values['TACTILE_GAIN'],
        'tactile_min_delta': values['TACTILE_MIN_DELTA'],
        'tactile_channels': values['TACTILE_CHANNELS'],
        'min_grasp_height_mm': values['MIN_GRASP_HEIGHT_MM'],
        'bbox_margin_px': values['BBOX_MARGIN_PX'],
        'pick_failure_rate': values['PICK_FAILURE_RATE'],
    }


# Input files a document may name; relative ones are read from the project root.
DOCUMENT_PATHS = (('scene',), ('backend', 'profile_path'), ('backend', 'log_path'))

def load_document(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f'config file {path} does not exist')
    text = path.read_text()
    try:
        if path.suffix == '.toml':
            if tomllib is None:
                raise ConfigError('TOML config files need Python 3.11 or newer')
            document = tomllib.loads(text)
        else:
            document = json.loads(text)
    except (json.JSONDecodeError, ValueError) as exc:
        raise ConfigError(f'{path}: {exc}') from None
    return project_paths(document)


def project_paths(document):
    for *parents, key in DOCUMENT_PATHS:
        section = document
        for parent in parents:
            section = section.get(parent) if isinstance(section, dict) else None
        if not isinstance(section, dict):
            continue
        value = section.get(key)
        if isinstance(value, str) and not Path(value).is_absolute():
            section[key] = str(Path(settings.BASE_DIR) / value)
    return document


def merge(base, override):
    merged = dict(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def resolve_run_config(document=None, flags=None):
    '''
    Merge defaults, config document and flags and validate the result.
    Flags set to None are treated as not given.
    '''
    from .serializers import CellConfigSerializer

    merged = merge(merge(settings_defaults(), document or {}), flags or {})
    if 'scene' not in merged:
        raise ConfigError('no scene given')
    serializer = CellConfigSerializer(data=merged)
    if not serializer.is_valid():
        raise ConfigError(f'invalid run config: {json.dumps(serializer.errors, sort_keys=True)}')
    return serializer.to_run_config()


def resolve_backend_descriptor(document=None, flags=None, seed=0):
    '''
    The classifier backend alone, for commands that need no scene. Same
    precedence as resolve_run_config.
    '''
    from .serializers import BackendDescriptorSerializer

    merged = merge(merge(settings_defaults()['backend'], document or {}), flags or {})
    serializer = BackendDescriptorSerializer(data=merged)
    if not serializer.is_valid():
        raise ConfigError(f'invalid backend: {json.dumps(serializer.errors, sort_keys=True)}')
    return BackendDescriptor(seed=seed, **serializer.validated_data)
