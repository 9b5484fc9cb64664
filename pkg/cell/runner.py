'''
One sorting run from spawn to shutdown. CellRunner executes the state the
machine is in, turns the outcome into an event, asks `step` for the next
state and carries out the returned actions. Every transition is appended to
the run log; the log holds logical ticks only, never wall-clock time.
'''
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from classify.backends import build_backend
from classify.exceptions import ClassifierTimeout, TransportError
from classify.parsing import ParsedLabel, parse_response
from classify.prompts import ImagePayload, build_prompt

from .bus import LOGICAL, ServiceBus, ServiceReply
from .cellsim import (
    GRIPPED, GarmentClass, Placement, ZoneId, apply_bounding_box,
    compute_basket_bbox, default_layout, move_item, render_camera,
    spawn_scene, world_to_document, zone_roi,
)
from .exceptions import ProtocolViolation, ServiceTimeoutError
from .frames import encode_png
from .fsm import (
    CellContext, CellState, Event, EventKind, ExportTwin, Stop,
    apply_actions, step,
)
from .grasp import (
    GraspPredictor, TactileSensor, check_reachability, default_robots,
    execute_pick, quick_occupancy_check, request_candidate_with_retry,
    shake_and_spread, verify_grasp,
)
from .segmentation import capture_baseline, segment
from .twin import export_twin_snapshot

logger = logging.getLogger(__name__)

# Independent streams derived from the run seed.
PICK_STREAM = 1
TACTILE_STREAM = 2


@dataclass
class CycleReport:
    item_id: str
    true_class: str
    predicted: Optional[ParsedLabel] = None
    destination_bin: Optional[str] = None
    candidate_retries: int = 0
    pick_retries: int = 0

    def to_document(self):
        return {
            'item': self.item_id,
            'true_class': self.true_class,
            'predicted': str(self.predicted) if self.predicted is not None else None,
            'destination_bin': self.destination_bin,
            'candidate_retries': self.candidate_retries,
            'pick_retries': self.pick_retries,
        }


@dataclass
class RunResult:
    records: list
    cycles: list
    world: object
    shutdown_reason: str
    candidate_requests: int
    snapshots: list = field(default_factory=list)

    def bins(self):
        '''
        Where every item ended up: one key per bin in zone C plus `A` for
        anything left in the basket.
        '''
        placed = {c.value: [] for c in GarmentClass if c != GarmentClass.EMPTY}
        placed[ZoneId.A.value] = []
        for item_id in sorted(self.world.items):
            zone = self.world.item_zone[item_id]
            if zone == ZoneId.C:
                placed[str(self.world.bin_of(item_id))].append(item_id)
            else:
                placed.setdefault(zone, []).append(item_id)
        return placed


def log_line(record):
    return json.dumps(record, sort_keys=True, separators=(',', ':'))


class CellRunner:
    def __init__(self, config, layout=None, backend=None):
        self.config = config
        self.layout = layout or default_layout()
        self.world = spawn_scene(config.scene, config.seed, self.layout)
        self.rng = np.random.default_rng([config.seed, PICK_STREAM])
        self.robots = default_robots(config.pick_failure_rate)
        self.alice = self.robots['Alice']
        self.sensor = TactileSensor(config.tactile_channels, config.tactile_gain, seed=[config.seed, TACTILE_STREAM])
        self.predictor = GraspPredictor(self.layout.cameras, min_height_mm=config.min_grasp_height_mm)
        self.backend = backend or build_backend(config.backend)
        self.prompt = build_prompt(model_name=self.backend.model_name)

        self.bus = ServiceBus(clock=LOGICAL)
        self.bus.register('grasp', lambda payload: self.predictor(*payload))
        self.bus.register('occupancy', lambda payload: quick_occupancy_check(*payload, self.predictor))
        self.bus.register('segment', lambda frame: segment(
            frame, self.seg_baseline, config.thresholds, self.layout.cameras[frame.camera_id]))
        self.bus.register('classify', self._classify_handler)

        self.state = CellState.INIT
        self.ctx = CellContext(candidate_budget=config.candidate_budget, pick_budget=config.pick_budget)
        self.records = []
        self.cycles = []
        self.snapshots = []
        self.candidate_requests = 0
        self.classify_calls = 0
        self.shutdown_reason = ''
        self.tactile_baseline = None
        self.seg_baseline = None
        self.candidate = None
        self.outcome = None
        self.cycle = None
        self.in_hand = None

    @property
    def cam2(self):
        return self.layout.cameras['Cam2']

    @property
    def zone_b_roi(self):
        return zone_roi(self.cam2, self.layout.zones[ZoneId.B].rect)

    def run(self, out_dir=None):
        twin_dir = Path(out_dir) / 'twin' if out_dir is not None else None
        logger.info('run started: %d items, seed %s', len(self.world.items), self.config.seed)
        try:
            while self.state != CellState.SHUTDOWN:
                if len(self.records) >= self.config.max_transitions:
                    event, extra = Event.of(EventKind.BUDGET_EXHAUSTED), {}
                else:
                    event, extra = self._execute(self.state)
                self._advance(event, extra, twin_dir)
        except TransportError as exc:
            self._abort(exc, out_dir)
            raise
        finally:
            self.bus.close()
        self._secure_leftovers()
        logger.info('run finished after %d cycles: %s', len(self.cycles), self.shutdown_reason)
        result = RunResult(
            records=self.records,
            cycles=self.cycles,
            world=self.world,
            shutdown_reason=self.shutdown_reason,
            candidate_requests=self.candidate_requests,
            snapshots=self.snapshots,
        )
        if out_dir is not None:
            write_outputs(result, out_dir)
        return result

    def _abort(self, exc, out_dir):
        '''
        A classifier that cannot be reached ends the run. The transitions made
        so far are still written, followed by one record naming the error.
        '''
        self.shutdown_reason = f'classifier transport error: {exc}'
        logger.error('run aborted in %s: %s', self.state.value, exc)
        self.records.append({
            'tick': len(self.records) + 1,
            'state': self.state.value,
            'aborted': self.shutdown_reason,
        })
        if out_dir is not None:
            write_run_log(self.records, out_dir)

    def _advance(self, event, extra, twin_dir):
        previous = self.state
        next_state, actions = step(previous, event, self.ctx)
        self.ctx = apply_actions(self.ctx, actions)
        record = {'tick': len(self.records) + 1, 'state': previous.value, 'event': str(event)}
        record.update({key: value for key, value in extra.items() if value is not None})
        for action in actions:
            if isinstance(action, ExportTwin) and self.config.export_twin:
                record['twin'] = self._export_twin(twin_dir)
            elif isinstance(action, Stop):
                self.shutdown_reason = action.reason
        self.records.append(record)
        logger.debug('%s --%s--> %s', previous.value, event, next_state.value)
        self.state = next_state

    def _execute(self, state):
        handler = getattr(self, f'_on_{state.name.lower()}')
        return handler()

    def _on_init(self):
        # Alice parks outside the camera views; the fingertips are open and unloaded.
        self.tactile_baseline = self.sensor.record_baseline()
        return Event.of(EventKind.READY), {}

    def _on_record_baselines(self):
        frames = [render_camera(self.world, 'Cam2') for _ in range(self.config.baseline_frames)]
        self.seg_baseline = capture_baseline(frames)
        return Event.of(EventKind.READY), {}

    def _request_candidate(self, frame, roi):
        self.candidate_requests += 1
        result = self.bus.call('grasp', (frame, roi), self.config.grasp_timeout_s)
        if result.timed_out:
            raise ServiceTimeoutError(result.correlation_id)
        return result.payload

    def _on_find_candidate_a(self):
        frame = render_camera(self.world, 'Cam1')
        bbox = compute_basket_bbox(frame, self.layout.rim_color, self.config.bbox_margin_px)
        try:
            candidate = self._request_candidate(apply_bounding_box(frame, bbox), bbox)
        except ServiceTimeoutError:
            return Event.of(EventKind.SERVICE_TIMEOUT), {}
        if candidate is None:
            return Event.of(EventKind.NO_CANDIDATE), {}
        self.candidate = candidate
        return Event.found(candidate), {}

    def _on_check_reach(self):
        reachable = check_reachability(self.candidate.world_pose, self.alice, self.layout.obstacles)
        return Event.of(EventKind.REACHABLE if reachable else EventKind.UNREACHABLE), {}

    def _on_pick(self):
        self.world, self.outcome = execute_pick(
            self.world, self.alice, self.candidate, self.rng, self.sensor, zones=(ZoneId.A,),
        )
        return Event.of(EventKind.READY), {'item': self.outcome.grasped_item}

    def _on_verify_grasp(self):
        outcome = self.outcome
        if verify_grasp(outcome.reading, self.tactile_baseline, self.config.tactile_min_delta) and outcome.grasped_item:
            item = self.world.item(outcome.grasped_item)
            self.cycle = CycleReport(
                item_id=item.item_id,
                true_class=item.true_class.value,
                candidate_retries=self.ctx.candidate_misses,
                pick_retries=self.ctx.pick_failures,
            )
            self.in_hand = item.item_id
            return Event.of(EventKind.GRASP_OK), {'item': item.item_id}
        self._release(outcome, ZoneId.A.value)
        return Event.of(EventKind.GRASP_FAIL), {}

    def _release(self, outcome, zone):
        if outcome.grasped_item is None:
            return
        item_zone = dict(self.world.item_zone)
        for item_id in (outcome.grasped_item,) + outcome.bycatch:
            item_zone[item_id] = zone
        self.world = self.world.evolve(item_zone=item_zone)

    def _on_shake_spread(self):
        self.world = shake_and_spread(self.world, self.alice, self.outcome, self.config.spread_factor)
        bycatch = ','.join(self.outcome.bycatch) or None
        return Event.of(EventKind.READY), {'item': self.in_hand, 'bycatch': bycatch}

    def _on_place_b(self):
        self.world = move_item(self.world, self.in_hand, Placement(ZoneId.B.value))
        self.in_hand = None
        return Event.of(EventKind.READY), {'item': self.cycle.item_id}

    def _on_retract(self):
        return Event.of(EventKind.READY), {}

    def _classify_handler(self, image):
        try:
            raw = self.backend.classify(image, self.prompt)
        except ClassifierTimeout:
            return ServiceReply(None, elapsed_s=float('inf'))
        return ServiceReply(raw, elapsed_s=raw.latency_s)

    def _on_classify(self):
        frame = render_camera(self.world, 'Cam2')
        on_table = self.world.items_in(ZoneId.B)
        item = on_table[0] if on_table else None
        if item is not None and (self.cycle is None or self.cycle.item_id != item.item_id):
            self.cycle = CycleReport(item_id=item.item_id, true_class=item.true_class.value)
        true_class = item.true_class.value if item is not None else GarmentClass.EMPTY.value
        self.classify_calls += 1
        image = ImagePayload(f'classify-{self.classify_calls:06d}', encode_png(frame.rgb), true_class)
        result = self.bus.call('classify', image, self.config.classify_timeout_s)
        item_id = item.item_id if item is not None else None
        if result.timed_out:
            return Event.of(EventKind.SERVICE_TIMEOUT), {'item': item_id}
        raw = result.payload
        label = parse_response(raw, lenient_punctuation=self.config.lenient_punctuation)
        if self.cycle is not None:
            self.cycle.predicted = label
        return Event.classified(label), {
            'item': item_id,
            'label': str(label),
            'latency_s': round(raw.latency_s, 6),
        }

    def _on_find_candidate_b(self):
        frame = render_camera(self.world, 'Cam2')
        roi = self.zone_b_roi
        try:
            candidate = request_candidate_with_retry(
                lambda: self._request_candidate(frame, roi), self.config.candidate_budget,
            )
        except ServiceTimeoutError:
            return Event.of(EventKind.SERVICE_TIMEOUT), {}
        if candidate is None:
            return Event.of(EventKind.NO_CANDIDATE), {}
        self.candidate = candidate
        return Event.found(candidate), {}

    def _on_pick_b(self):
        self.world, outcome = execute_pick(
            self.world, self.alice, self.candidate, self.rng, self.sensor, zones=(ZoneId.B,),
        )
        if verify_grasp(outcome.reading, self.tactile_baseline, self.config.tactile_min_delta) and outcome.grasped_item:
            self.in_hand = outcome.grasped_item
            return Event.of(EventKind.GRASP_OK), {'item': outcome.grasped_item}
        self._release(outcome, ZoneId.B.value)
        return Event.of(EventKind.GRASP_FAIL), {}

    def _on_place_c(self):
        destination = self.ctx.destination or GarmentClass.OTHER.value
        item_id = self.in_hand
        self.world = move_item(self.world, item_id, Placement(ZoneId.C.value, bin=destination))
        self.in_hand = None
        if self.cycle is None or self.cycle.item_id != item_id:
            self.cycle = CycleReport(item_id=item_id, true_class=self.world.item(item_id).true_class.value)
        self.cycle.destination_bin = destination
        self.cycles.append(self.cycle)
        logger.info('%s (%s) sorted into %s', item_id, self.cycle.true_class, destination)
        self.cycle = None
        return Event.of(EventKind.READY), {'item': item_id, 'bin': destination}

    def _on_quick_check_b(self):
        frame = render_camera(self.world, 'Cam2')
        result = self.bus.call('occupancy', (frame, self.zone_b_roi), self.config.grasp_timeout_s)
        if result.timed_out:
            return Event.of(EventKind.SERVICE_TIMEOUT), {}
        return Event.of(EventKind.ZONE_B_OCCUPIED if result.payload else EventKind.ZONE_B_EMPTY), {}

    def _export_twin(self, twin_dir):
        frame = render_camera(self.world, 'Cam2')
        result = self.bus.call('segment', frame, self.config.segment_timeout_s)
        cloud = None if result.timed_out else result.payload
        document = export_twin_snapshot(
            self.world, cloud, self.robots, out_dir=twin_dir, index=len(self.snapshots) + 1,
        )
        self.snapshots.append(document)
        return f'snapshot_{len(self.snapshots):04d}.json'

    def _secure_leftovers(self):
        '''
        After an early shutdown anything still in the gripper or on the table
        goes to the `other` bin so no item is left unaccounted for.
        '''
        for item_id in sorted(self.world.items):
            if self.world.item_zone[item_id] not in (GRIPPED, ZoneId.B):
                continue
            logger.warning('%s left on the table at shutdown, moving it to other', item_id)
            self.world = move_item(self.world, item_id, Placement(ZoneId.C.value, bin=GarmentClass.OTHER.value))
            report = self.cycle if self.cycle is not None and self.cycle.item_id == item_id else CycleReport(
                item_id=item_id, true_class=self.world.item(item_id).true_class.value,
            )
            report.destination_bin = GarmentClass.OTHER.value
            self.cycles.append(report)
            self.cycle = None


def run_until_empty(config, out_dir=None, layout=None, backend=None):
    return CellRunner(config, layout=layout, backend=backend).run(out_dir)


def write_run_log(records, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / 'run.jsonl'
    path.write_text(''.join(log_line(record) + '\n' for record in records))
    return path


def write_outputs(result, out_dir):
    out_dir = Path(out_dir)
    write_run_log(result.records, out_dir)
    (out_dir / 'cycles.json').write_text(
        json.dumps([cycle.to_document() for cycle in result.cycles], indent=2, sort_keys=True) + '\n'
    )
    (out_dir / 'bins.json').write_text(json.dumps(result.bins(), indent=2, sort_keys=True) + '\n')
    (out_dir / 'world_final.json').write_text(json.dumps(world_to_document(result.world), sort_keys=True) + '\n')
    return out_dir


def _event_from_record(text):
    if text.startswith(f'{EventKind.CLASSIFIED.value}('):
        return Event.classified(ParsedLabel.from_string(text[len(EventKind.CLASSIFIED.value) + 1:-1]))
    return Event.of(text)


def replay_log(records, candidate_budget=5, pick_budget=3):
    '''
    Re-run a recorded transition sequence through `step`. Raises
    ProtocolViolation when a record does not follow from the previous one.
    Returns the final state.
    '''
    state = CellState.INIT
    ctx = CellContext(candidate_budget=candidate_budget, pick_budget=pick_budget)
    last_tick = 0
    for record in records:
        if record['tick'] <= last_tick:
            raise ProtocolViolation(f"tick {record['tick']} does not increase")
        if record['state'] != state.value:
            raise ProtocolViolation(f"tick {record['tick']}: log is in {record['state']}, machine in {state.value}")
        if 'aborted' in record:
            break
        state, actions = step(state, _event_from_record(record['event']), ctx)
        ctx = apply_actions(ctx, actions)
        last_tick = record['tick']
    return state


def read_run_log(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
