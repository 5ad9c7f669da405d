"""
Stage-indexed monotone approximations of left-c.e. and right-c.e. reals.

A stream is total up to a declared horizon; asking for a later stage returns
the value held at the horizon.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from dyadic import Dyadic, ZERO, ONE
from traces import Verdict
from utils import InputContractError

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


class StreamContractError(InputContractError):
    """A stream is not monotone in its declared direction or leaves its bounds."""


class Direction(Enum):
    NONDECREASING = "nondecreasing"
    NONINCREASING = "nonincreasing"

    @classmethod
    def parse(cls, value):
        if isinstance(value, Direction):
            return value
        text = str(value).strip().lower().replace("_", "-")
        aliases = {
            "nondecreasing": cls.NONDECREASING,
            "non-decreasing": cls.NONDECREASING,
            "left": cls.NONDECREASING,
            "left-ce": cls.NONDECREASING,
            "nonincreasing": cls.NONINCREASING,
            "non-increasing": cls.NONINCREASING,
            "right": cls.NONINCREASING,
            "right-ce": cls.NONINCREASING,
        }
        if text not in aliases:
            raise StreamContractError(f"Unknown stream direction: {value!r}")
        return aliases[text]


@dataclass(frozen=True)
class ApproxStream:
    values: Tuple[Dyadic, ...]
    direction: Direction
    lo: Optional[Dyadic] = None
    hi: Optional[Dyadic] = None

    def __post_init__(self):
        if not self.values:
            raise StreamContractError("A stream needs at least the stage-0 value")
        bad = first_monotonicity_violation(self.values, self.direction)
        if bad is not None:
            raise StreamContractError(
                f"{self.direction.value} stream breaks monotonicity at stage {bad}: "
                f"{self.values[bad - 1]} -> {self.values[bad]}"
            )
        for stage, value in enumerate(self.values):
            if self.lo is not None and value < self.lo:
                raise StreamContractError(f"stage {stage}: {value} below lower bound {self.lo}")
            if self.hi is not None and value > self.hi:
                raise StreamContractError(f"stage {stage}: {value} above upper bound {self.hi}")

    @property
    def horizon(self):
        return len(self.values) - 1

    def value(self, stage):
        if stage < 0:
            raise IndexError(f"negative stage {stage}")
        if stage > self.horizon:
            return self.values[-1]
        return self.values[stage]

    __call__ = value

    def final(self):
        return self.values[-1]

    def breakpoints(self):
        return [s for s in range(1, len(self.values)) if self.values[s] != self.values[s - 1]]

    def extended(self, horizon):
        """The same stream held constant out to a later horizon."""
        if horizon <= self.horizon:
            return self
        padding = (self.values[-1],) * (horizon - self.horizon)
        return type(self)(self.values + padding, self.direction, self.lo, self.hi)


class LeftCEStream(ApproxStream):
    def __init__(self, values, direction=Direction.NONDECREASING, lo=None, hi=None):
        if direction is not Direction.NONDECREASING:
            raise StreamContractError("A left-c.e. stream must be nondecreasing")
        super().__init__(tuple(values), direction, lo, hi)


class RightCEStream(ApproxStream):
    def __init__(self, values, direction=Direction.NONINCREASING, lo=None, hi=None):
        if direction is not Direction.NONINCREASING:
            raise StreamContractError("A right-c.e. stream must be nonincreasing")
        super().__init__(tuple(values), direction, lo, hi)


def first_monotonicity_violation(values, direction):
    for stage in range(1, len(values)):
        if direction is Direction.NONDECREASING and values[stage] < values[stage - 1]:
            return stage
        if direction is Direction.NONINCREASING and values[stage] > values[stage - 1]:
            return stage
    return None


def make_stream(values, direction, lo=None, hi=None):
    direction = Direction.parse(direction)
    if direction is Direction.NONDECREASING:
        return LeftCEStream(values, lo=lo, hi=hi)
    return RightCEStream(values, lo=lo, hi=hi)


def scripted_stream(events, direction, horizon=None, lo=None, hi=None):
    """Step function through (stage, value) events, holding the last value.

    The first event must be at stage 0. Without an explicit horizon the
    stream ends at the last event's stage.
    """
    direction = Direction.parse(direction)
    events = [(int(stage), Dyadic.parse(value)) for stage, value in events]
    if not events:
        raise StreamContractError("A scripted stream needs at least one event")
    if events[0][0] != 0:
        raise StreamContractError(f"First event must be at stage 0, got stage {events[0][0]}")

    for (prev_stage, prev_value), (stage, value) in zip(events, events[1:]):
        if stage <= prev_stage:
            raise StreamContractError(f"Events are not stage-sorted at stage {stage}")
        if direction is Direction.NONDECREASING and value < prev_value:
            raise StreamContractError(f"Stream decreases at stage {stage}: {prev_value} -> {value}")
        if direction is Direction.NONINCREASING and value > prev_value:
            raise StreamContractError(f"Stream increases at stage {stage}: {prev_value} -> {value}")

    last_stage = events[-1][0]
    if horizon is None:
        horizon = last_stage
    values = []
    cursor = 0
    current = events[0][1]
    for stage in range(horizon + 1):
        while cursor < len(events) and events[cursor][0] <= stage:
            current = events[cursor][1]
            cursor += 1
        values.append(current)
    return make_stream(values, direction, lo=lo, hi=hi)


def constant_stream(value, horizon, direction=Direction.NONDECREASING):
    return make_stream([Dyadic.parse(value)] * (horizon + 1), direction)


def affine(base, q, l):
    """s -> q * base(s) + l, for q > 0."""
    q = Dyadic.parse(q)
    l = Dyadic.parse(l)
    if q <= 0:
        raise StreamContractError(f"affine() needs q > 0, got {q}")
    lo = q * base.lo + l if base.lo is not None else None
    hi = q * base.hi + l if base.hi is not None else None
    return make_stream([q * v + l for v in base.values], base.direction, lo=lo, hi=hi)


def default_beta(horizon):
    """The fixed witness beta_s = 13/16 - 2^-(s+2), converging up to 13/16."""
    target = Dyadic(13, 4)
    return LeftCEStream(
        [target - Dyadic.pow2(s + 2) for s in range(horizon + 1)],
        lo=ZERO,
        hi=ONE,
    )


def solovay_domination_check(alpha, beta, n, horizon):
    """Finite-prefix check that n*beta - alpha is nondecreasing up to horizon.

    n*(beta_t - beta_s) >= alpha_t - alpha_s for every s < t is the same as
    n*beta_t - alpha_t never dropping between consecutive stages.
    """
    if n <= 0:
        raise StreamContractError(f"Solovay constant must be positive, got {n}")
    previous = n * beta.value(0) - alpha.value(0)
    for t in range(1, horizon + 1):
        current = n * beta.value(t) - alpha.value(t)
        if current < previous:
            return Verdict(False, t, f"{n}*beta - alpha drops from {previous} to {current}")
        previous = current
    return Verdict(True)


def solovay_witness_for_affine(q):
    """Least power of two n with n*q >= 1.

    For alpha = q*beta + l the stream n*alpha - beta is nondecreasing, which
    exhibits beta <=_S alpha.
    """
    q = Dyadic.parse(q)
    if q <= 0:
        raise StreamContractError(f"q must be positive, got {q}")
    n = 1
    while n * q < 1:
        n <<= 1
    return n


@dataclass
class ThetaFamily:
    """Finite family i -> right-c.e. stream theta^i."""

    streams: List[RightCEStream] = field(default_factory=list)

    def __post_init__(self):
        for index, stream in enumerate(self.streams):
            if stream.direction is not Direction.NONINCREASING:
                raise StreamContractError(f"theta^{index} is not nonincreasing")

    def __len__(self):
        return len(self.streams)

    def value(self, index, stage):
        return self.streams[index].value(stage)

    def snapshot(self, stage):
        return [stream.value(stage) for stream in self.streams]


def check_stream_values(values, direction, label="stream"):
    """Re-check a list of values pulled back out of a trace."""
    direction = Direction.parse(direction)
    bad = first_monotonicity_violation(values, direction)
    if bad is None:
        return Verdict(True)
    update_terminal_log(f"{label} is not {direction.value} at position {bad}", "WARN")
    return Verdict(False, bad, f"{label}: {values[bad - 1]} -> {values[bad]}")
