import json
from pathlib import Path

from django.conf import settings
from rest_framework import serializers

from classify.backends import BackendDescriptor, BackendKind
from classify.exceptions import BackendConfigError

from .cellsim import ITEM_CLASSES, SceneSpec
from .config import RunConfig
from .exceptions import ConfigError
from .models import CellRun, CycleRecord
from .segmentation import SegThresholds


class SceneSpecSerializer(serializers.Serializer):
    name = serializers.CharField(allow_blank=True, default='')
    counts = serializers.DictField(child=serializers.IntegerField(min_value=0))
    foreign_objects = serializers.IntegerField(min_value=0, default=0)
    entangle_p = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.0)
    max_entangled_pairs = serializers.IntegerField(min_value=0, allow_null=True, default=None)
    stacking_factor = serializers.FloatField(default=4.0)

    def validate_counts(self, value):
        known = {c.value for c in ITEM_CLASSES}
        unknown = sorted(set(value) - known)
        if unknown:
            raise serializers.ValidationError(f'unknown item classes: {", ".join(unknown)}')
        return value

    def validate_stacking_factor(self, value):
        if value <= 0:
            raise serializers.ValidationError('must be positive')
        return value

    def to_scene(self):
        return SceneSpec(**self.validated_data)


def load_scene(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f'scene file {path} does not exist')
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f'{path}: {exc}') from None
    document.setdefault('name', path.stem)
    serializer = SceneSpecSerializer(data=document)
    if not serializer.is_valid():
        raise ConfigError(f'{path}: {json.dumps(serializer.errors, sort_keys=True)}')
    return serializer.to_scene()


class BackendDescriptorSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=BackendKind.CHOICES)
    model_name = serializers.CharField()
    timeout_s = serializers.FloatField()
    endpoint = serializers.CharField(required=False, allow_null=True)
    profile_path = serializers.CharField(required=False, allow_null=True)
    log_path = serializers.CharField(required=False, allow_null=True)

    def validate_timeout_s(self, value):
        if value <= 0:
            raise serializers.ValidationError('must be positive')
        return value

    def validate(self, attrs):
        if attrs['kind'] == BackendKind.LIVE and not attrs.get('endpoint'):
            attrs['endpoint'] = settings.SORTCELL['ENDPOINT']
        try:
            BackendDescriptor(**attrs)
        except BackendConfigError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs


class SegThresholdsSerializer(serializers.Serializer):
    depth_delta_mm = serializers.FloatField()
    rgb_delta = serializers.IntegerField()

    def validate(self, attrs):
        if attrs['depth_delta_mm'] <= 0 or attrs['rgb_delta'] <= 0:
            raise serializers.ValidationError('thresholds must be strictly positive')
        return attrs


class CellConfigSerializer(serializers.Serializer):
    '''
    The merged run configuration. `scene` is either an inline scene document
    or the path of a scene file.
    '''
    seed = serializers.IntegerField()
    scene = serializers.JSONField()
    backend = BackendDescriptorSerializer()
    thresholds = SegThresholdsSerializer()
    candidate_budget = serializers.IntegerField(min_value=1)
    pick_budget = serializers.IntegerField(min_value=0)
    max_transitions = serializers.IntegerField(min_value=1)
    classify_timeout_s = serializers.FloatField()
    grasp_timeout_s = serializers.FloatField()
    segment_timeout_s = serializers.FloatField()
    baseline_frames = serializers.IntegerField(min_value=1)
    spread_factor = serializers.FloatField(min_value=1.0)
    tactile_gain = serializers.FloatField(min_value=0.0)
    tactile_min_delta = serializers.FloatField(min_value=0.0)
    tactile_channels = serializers.IntegerField(min_value=1)
    min_grasp_height_mm = serializers.FloatField(min_value=0.0)
    bbox_margin_px = serializers.IntegerField(min_value=0)
    pick_failure_rate = serializers.FloatField(min_value=0.0, max_value=1.0)
    lenient_punctuation = serializers.BooleanField(default=False)
    export_twin = serializers.BooleanField(default=True)
    out = serializers.CharField(required=False, allow_null=True)

    def validate_scene(self, value):
        if isinstance(value, str):
            try:
                return load_scene(value)
            except ConfigError as exc:
                raise serializers.ValidationError(str(exc))
        scene = SceneSpecSerializer(data=value)
        if not scene.is_valid():
            raise serializers.ValidationError(scene.errors)
        return scene.to_scene()

    def validate(self, attrs):
        for key in ('classify_timeout_s', 'grasp_timeout_s', 'segment_timeout_s'):
            if attrs[key] <= 0:
                raise serializers.ValidationError({key: 'must be positive'})
        return attrs

    def to_run_config(self):
        data = dict(self.validated_data)
        data['backend'] = BackendDescriptor(seed=data['seed'], **data['backend'])
        data['thresholds'] = SegThresholds(**data['thresholds'])
        return RunConfig(**data)


class TwinRobotSerializer(serializers.Serializer):
    id = serializers.CharField()
    base = serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3)
    reach_mm = serializers.ListField(child=serializers.FloatField(min_value=0.0), min_length=2, max_length=2)


class TwinBoxSerializer(serializers.Serializer):
    name = serializers.CharField()
    min = serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3)
    max = serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3)


class TwinZoneSerializer(serializers.Serializer):
    id = serializers.CharField()
    rect = serializers.ListField(child=serializers.FloatField(), min_length=4, max_length=4)


class TwinCloudSerializer(serializers.Serializer):
    path = serializers.CharField(allow_null=True)
    points = serializers.IntegerField(min_value=0)


class TwinSnapshotSerializer(serializers.Serializer):
    """Mirrors cell/schemas/twin_snapshot.schema.json."""
    schema = serializers.CharField()
    tick = serializers.IntegerField(min_value=0)
    robots = TwinRobotSerializer(many=True)
    zones = TwinZoneSerializer(many=True)
    obstacles = TwinBoxSerializer(many=True)
    cloud = TwinCloudSerializer()
    gripped = serializers.ListField(child=serializers.CharField())


class CycleRecordSerializer(serializers.ModelSerializer):
    class Meta:
        model = CycleRecord
        fields = [
            'id', 'run', 'index', 'item_id', 'true_class', 'predicted',
            'destination_bin', 'candidate_retries', 'pick_retries',
        ]


class CellRunSerializer(serializers.ModelSerializer):
    cycle_records = CycleRecordSerializer(many=True, read_only=True)

    class Meta:
        model = CellRun
        fields = [
            'id', 'seed', 'scene_name', 'backend_kind', 'model_name',
            'item_count', 'cycles', 'candidate_requests', 'transitions',
            'shutdown_reason', 'output_dir', 'created_at', 'cycle_records',
        ]
