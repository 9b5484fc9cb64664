'''
The inspection state machine. `step` is a pure transition function over
(state, event, budget counters); the runner executes the states and feeds
the resulting events back in.

Alice picks from the basket (zone A), verifies the grasp on the tactile
fingertips, shakes off bycatch, spreads the garment on the inspection table
(zone B) and retracts. The table is then classified and the garment is
picked again and routed to its bin in zone C. A quick look at zone B decides
whether to classify again or go back to the basket.
'''
import logging
from dataclasses import dataclass, replace
from typing import Optional

from django.db import models

from cell.cellsim import GarmentClass

from .exceptions import ProtocolViolation

logger = logging.getLogger(__name__)

DEFAULT_CANDIDATE_BUDGET = 5
DEFAULT_PICK_BUDGET = 3


class CellState(models.TextChoices):
    INIT = 'Init'
    RECORD_BASELINES = 'RecordBaselines'
    FIND_CANDIDATE_A = 'FindCandidateA'
    CHECK_REACH = 'CheckReach'
    PICK = 'Pick'
    VERIFY_GRASP = 'VerifyGrasp'
    SHAKE_SPREAD = 'ShakeSpread'
    PLACE_B = 'PlaceB'
    RETRACT = 'Retract'
    CLASSIFY = 'Classify'
    FIND_CANDIDATE_B = 'FindCandidateB'
    PICK_B = 'PickB'
    PLACE_C = 'PlaceC'
    QUICK_CHECK_B = 'QuickCheckB'
    SHUTDOWN = 'Shutdown'


class EventKind(models.TextChoices):
    CANDIDATE_FOUND = 'CandidateFound'
    NO_CANDIDATE = 'NoCandidate'
    REACHABLE = 'Reachable'
    UNREACHABLE = 'Unreachable'
    GRASP_OK = 'GraspOk'
    GRASP_FAIL = 'GraspFail'
    CLASSIFIED = 'Classified'
    ZONE_B_OCCUPIED = 'ZoneBOccupied'
    ZONE_B_EMPTY = 'ZoneBEmpty'
    SERVICE_TIMEOUT = 'ServiceTimeout'
    BUDGET_EXHAUSTED = 'BudgetExhausted'
    # Completion of a state that has a single way out.
    READY = 'Ready'


@dataclass(frozen=True)
class Event:
    kind: EventKind
    candidate: Optional[object] = None
    label: Optional[object] = None

    @classmethod
    def of(cls, kind):
        return cls(EventKind(kind))

    @classmethod
    def found(cls, candidate):
        return cls(EventKind.CANDIDATE_FOUND, candidate=candidate)

    @classmethod
    def classified(cls, label):
        return cls(EventKind.CLASSIFIED, label=label)

    def __str__(self):
        if self.kind == EventKind.CLASSIFIED:
            return f'{self.kind.value}({self.label})'
        return self.kind.value


@dataclass(frozen=True)
class RouteTo:
    bin: str


@dataclass(frozen=True)
class CountCandidateMiss:
    pass


@dataclass(frozen=True)
class CountPickFailure:
    pass


@dataclass(frozen=True)
class ResetBudgets:
    pass


@dataclass(frozen=True)
class ExportTwin:
    pass


@dataclass(frozen=True)
class Stop:
    reason: str


@dataclass(frozen=True)
class CellContext:
    candidate_budget: int = DEFAULT_CANDIDATE_BUDGET
    pick_budget: int = DEFAULT_PICK_BUDGET
    candidate_misses: int = 0
    pick_failures: int = 0
    destination: Optional[str] = None


def apply_actions(ctx, actions):
    for action in actions:
        if isinstance(action, CountCandidateMiss):
            ctx = replace(ctx, candidate_misses=ctx.candidate_misses + 1)
        elif isinstance(action, CountPickFailure):
            ctx = replace(ctx, pick_failures=ctx.pick_failures + 1)
        elif isinstance(action, ResetBudgets):
            ctx = replace(ctx, candidate_misses=0, pick_failures=0)
        elif isinstance(action, RouteTo):
            ctx = replace(ctx, destination=action.bin)
    return ctx


def destination_for(label):
    '''
    Bin for a classification. Invalid answers and `empty` while a garment lies
    on the table both go to `other`.
    '''
    if label is None or not label.is_valid or label.label == GarmentClass.EMPTY:
        return GarmentClass.OTHER.value
    return label.label.value


def _candidate_miss(ctx):
    if ctx.candidate_misses + 1 >= ctx.candidate_budget:
        return CellState.SHUTDOWN, [CountCandidateMiss(), Stop('no grasp candidate in the basket')]
    return CellState.FIND_CANDIDATE_A, [CountCandidateMiss()]


def _grasp_failed(ctx):
    if ctx.pick_failures + 1 > ctx.pick_budget:
        return CellState.SHUTDOWN, [CountPickFailure(), Stop('pick budget exhausted')]
    return CellState.FIND_CANDIDATE_A, [CountPickFailure()]


S, E = CellState, EventKind

# (state, event) -> next state, or a callable of the context for budgeted branches.
TRANSITIONS = {
    (S.INIT, E.READY): S.RECORD_BASELINES,
    (S.RECORD_BASELINES, E.READY): S.FIND_CANDIDATE_A,
    (S.FIND_CANDIDATE_A, E.CANDIDATE_FOUND): S.CHECK_REACH,
    (S.FIND_CANDIDATE_A, E.NO_CANDIDATE): _candidate_miss,
    (S.FIND_CANDIDATE_A, E.SERVICE_TIMEOUT): _candidate_miss,
    (S.CHECK_REACH, E.REACHABLE): S.PICK,
    (S.CHECK_REACH, E.UNREACHABLE): _candidate_miss,
    (S.PICK, E.READY): S.VERIFY_GRASP,
    (S.VERIFY_GRASP, E.GRASP_OK): lambda ctx: (S.SHAKE_SPREAD, [ResetBudgets()]),
    (S.VERIFY_GRASP, E.GRASP_FAIL): _grasp_failed,
    (S.SHAKE_SPREAD, E.READY): S.PLACE_B,
    (S.PLACE_B, E.READY): lambda ctx: (S.RETRACT, [ExportTwin()]),
    (S.RETRACT, E.READY): S.CLASSIFY,
    (S.CLASSIFY, E.SERVICE_TIMEOUT): lambda ctx: (S.FIND_CANDIDATE_B, [RouteTo(GarmentClass.OTHER.value)]),
    (S.FIND_CANDIDATE_B, E.CANDIDATE_FOUND): S.PICK_B,
    (S.FIND_CANDIDATE_B, E.NO_CANDIDATE): lambda ctx: (S.SHUTDOWN, [Stop('lost the garment on the table')]),
    (S.FIND_CANDIDATE_B, E.SERVICE_TIMEOUT): lambda ctx: (S.SHUTDOWN, [Stop('grasp service timed out on the table')]),
    (S.PICK_B, E.GRASP_OK): S.PLACE_C,
    # Retries on the table are unbounded; the transition guard caps them.
    (S.PICK_B, E.GRASP_FAIL): S.FIND_CANDIDATE_B,
    (S.PLACE_C, E.READY): lambda ctx: (S.QUICK_CHECK_B, [ExportTwin()]),
    (S.QUICK_CHECK_B, E.ZONE_B_OCCUPIED): S.CLASSIFY,
    (S.QUICK_CHECK_B, E.ZONE_B_EMPTY): S.FIND_CANDIDATE_A,
    (S.QUICK_CHECK_B, E.SERVICE_TIMEOUT): lambda ctx: (S.SHUTDOWN, [Stop('grasp service timed out on the table')]),
}


def step(state, event, ctx):
    state = CellState(state)
    if state == S.SHUTDOWN:
        raise ProtocolViolation(f'no transitions leave {state.value}')
    if event.kind == E.BUDGET_EXHAUSTED:
        return S.SHUTDOWN, [Stop('transition budget exhausted')]
    if state == S.CLASSIFY and event.kind == E.CLASSIFIED:
        return S.FIND_CANDIDATE_B, [RouteTo(destination_for(event.label))]
    try:
        target = TRANSITIONS[(state, event.kind)]
    except KeyError:
        raise ProtocolViolation(f'undefined transition: {state.value} on {event}') from None
    if callable(target):
        return target(ctx)
    return target, []
