"""Perturb-and-observe stabilization of the four operating-point parameters.

Each parameter in turn is tried at ``-step``, ``0`` and ``+step`` around its
committed value; every trial is held for ``dwell_epochs`` epochs and scored
by the mean of the measured objective. The best offset is committed and
the controller moves on to the next parameter (round robin).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .core import DEFAULT_BOUNDS, DEFAULT_STEPS, EpochStats, ParamId, SystemOperatingPoint


class Objective(str, enum.Enum):
    MAXIMIZE_COUNTS = "maximize_counts"
    MINIMIZE_QBER = "minimize_qber"


class Phase(enum.IntEnum):
    TRIAL_MINUS = 0
    TRIAL_CENTER = 1
    TRIAL_PLUS = 2
    COMMIT = 3


PHASE_SIGN = {Phase.TRIAL_MINUS: -1, Phase.TRIAL_CENTER: 0, Phase.TRIAL_PLUS: 1}


@dataclass(frozen=True)
class TunableParameter:
    id: ParamId
    step: float
    bounds: tuple[float, float]
    objective: Objective
    dwell_epochs: int = 3

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"{self.id.value}: step must be > 0")
        if not self.bounds[0] <= self.bounds[1]:
            raise ValueError(f"{self.id.value}: bounds out of order")
        if self.dwell_epochs < 1:
            raise ValueError(f"{self.id.value}: dwell_epochs must be >= 1")


DEFAULT_OBJECTIVES = {
    ParamId.DETECTION_TIMING: Objective.MAXIMIZE_COUNTS,
    ParamId.ENCODER_BIAS: Objective.MINIMIZE_QBER,
    ParamId.AMZI_TEMPERATURE: Objective.MINIMIZE_QBER,
    ParamId.PHASE_COMP_AMPLITUDE: Objective.MINIMIZE_QBER,
}


def default_parameters(dwell_epochs: int = 3, order: Sequence[ParamId] = tuple(ParamId)
                       ) -> list[TunableParameter]:
    return [TunableParameter(p, DEFAULT_STEPS[p], DEFAULT_BOUNDS[p], DEFAULT_OBJECTIVES[p],
                             dwell_epochs) for p in order]


@dataclass(frozen=True)
class ControllerState:
    active_index: int = 0
    phase: Phase = Phase.TRIAL_MINUS
    trial_scores: tuple[float | None, float | None, float | None] = (None, None, None)
    cycle_count: int = 0
    n_parameters: int = 4


def propose_trial(state: ControllerState, op_point: SystemOperatingPoint,
                  parameter: TunableParameter) -> SystemOperatingPoint:
    """Operating point to hold during the current trial phase.

    A displacement that would leave the bounds is replaced by the center
    value.
    """
    if state.phase == Phase.COMMIT:
        return op_point
    sign = PHASE_SIGN[state.phase]
    center = op_point.get(parameter.id)
    value = center + sign * parameter.step
    lo, hi = parameter.bounds
    if value < lo - 1e-12 or value > hi + 1e-12:
        value = center
    return op_point.with_value(parameter.id, value, parameter.step, parameter.bounds)


def _is_better(a: float, b: float, objective: Objective) -> bool:
    if math.isnan(a):
        return False
    if math.isnan(b):
        return True
    return a > b if objective == Objective.MAXIMIZE_COUNTS else a < b


def record_and_select(state: ControllerState, trial_scores: Sequence[float],
                      objective: Objective) -> tuple[ControllerState, int]:
    """Pick the best of the three trials; return the next state and -1/0/+1.

    The center wins every tie; between two equal off-center scores the
    lower offset wins.
    """
    minus, center, plus = (float(s) for s in trial_scores)
    best, best_score = 0, center
    for sign, score in ((-1, minus), (1, plus)):
        if _is_better(score, best_score, objective):
            best, best_score = sign, score
    nxt = (state.active_index + 1) % state.n_parameters
    new_state = ControllerState(
        active_index=nxt,
        phase=Phase.TRIAL_MINUS,
        trial_scores=(None, None, None),
        cycle_count=state.cycle_count + (1 if nxt == 0 else 0),
        n_parameters=state.n_parameters,
    )
    return new_state, best


def score(stats: EpochStats, objective: Objective) -> float:
    if objective == Objective.MAXIMIZE_COUNTS:
        return stats.sifted_rate_bps
    return stats.qber


def commit(op_point: SystemOperatingPoint, parameter: TunableParameter,
           offset_sign: int) -> SystemOperatingPoint:
    value = op_point.get(parameter.id) + offset_sign * parameter.step
    return op_point.with_value(parameter.id, value, parameter.step, parameter.bounds)


@dataclass(frozen=True)
class Decision:
    """One committed perturb-and-observe decision (logged as an event)."""

    parameter: ParamId
    scores: tuple[float, float, float]
    offset: int
    old_value: float
    new_value: float


class ChannelHandle(Protocol):
    def measure(self, op_point: SystemOperatingPoint) -> EpochStats: ...


@dataclass
class Controller:
    """Epoch-driven perturb-and-observe state machine for one channel.

    Call :meth:`applied_point` before each epoch to get the operating point
    to hold, then :meth:`observe` with the epoch's stats. ``observe`` returns
    a :class:`Decision` whenever a parameter cycle completes.
    """

    parameters: list[TunableParameter]
    state: ControllerState = field(default=None)
    _samples: list[float] = field(default_factory=list)
    _scores: list[float] = field(default_factory=list)
    _cache: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.parameters:
            raise ValueError("controller needs at least one parameter")
        if self.state is None:
            self.state = ControllerState(n_parameters=len(self.parameters))

    @property
    def active(self) -> TunableParameter:
        return self.parameters[self.state.active_index]

    @property
    def idle(self) -> bool:
        """True between cycles, i.e. before the first trial of a parameter."""
        return self.state.phase == Phase.TRIAL_MINUS and not self._samples

    def applied_point(self, committed: SystemOperatingPoint) -> SystemOperatingPoint:
        # the trial point only changes with the phase or the committed point
        c = self._cache
        if c is not None and c[0] is self.state and c[1] is committed:
            return c[2]
        point = propose_trial(self.state, committed, self.active)
        self._cache = (self.state, committed, point)
        return point

    def observe(self, stats: EpochStats, committed: SystemOperatingPoint
                ) -> tuple[SystemOperatingPoint, Decision | None]:
        param = self.active
        self._samples.append(score(stats, param.objective))
        if len(self._samples) < param.dwell_epochs:
            return committed, None
        self._scores.append(_mean(self._samples))
        self._samples = []
        if len(self._scores) < 3:
            st = self.state
            self.state = ControllerState(st.active_index, Phase(st.phase + 1),
                                         _padded(self._scores), st.cycle_count, st.n_parameters)
            return committed, None
        scores = tuple(self._scores)
        self._scores = []
        self.state, offset = record_and_select(
            ControllerState(self.state.active_index, Phase.COMMIT, scores,
                            self.state.cycle_count, self.state.n_parameters),
            scores, param.objective)
        new_point = commit(committed, param, offset)
        decision = Decision(param.id, scores, offset, committed.get(param.id),
                            new_point.get(param.id))
        return new_point, decision


def _mean(xs: list[float]) -> float:
    finite = [x for x in xs if not math.isnan(x)]
    return sum(finite) / len(finite) if finite else math.nan


def _padded(scores: list[float]):
    return tuple(scores) + (None,) * (3 - len(scores))


def stabilization_round(op_point: SystemOperatingPoint, channel: ChannelHandle | Callable,
                        parameters: Sequence[TunableParameter],
                        decisions: list | None = None) -> SystemOperatingPoint:
    """One complete propose/measure/select cycle over every parameter."""
    measure = channel.measure if hasattr(channel, "measure") else channel
    controller = Controller(list(parameters))
    for _ in range(len(parameters)):
        decision = None
        while decision is None:
            stats = measure(controller.applied_point(op_point))
            op_point, decision = controller.observe(stats, op_point)
        if decisions is not None:
            decisions.append(decision)
    return op_point
