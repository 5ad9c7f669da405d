"""
Prefix-free machines as append-only logs of convergence events.

A machine is never executed: every construction only looks at the halting
probability Omega_M[s] and at K_M(tau)[s], so a stage-ordered list of
(stage, program, output) events is all we keep.
"""

import bisect
import math
from dataclasses import dataclass
from itertools import count, product

from dyadic import Dyadic, ZERO
from traces import Verdict
from utils import InputContractError

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


INFINITY = math.inf


class MachineTapeError(InputContractError):
    """Malformed description events (non-binary strings, stages out of order)."""


def _check_binary(text, what):
    if not isinstance(text, str) or any(ch not in "01" for ch in text):
        raise MachineTapeError(f"{what} must be a binary string, got {text!r}")


@dataclass(frozen=True)
class DescriptionEvent:
    stage: int
    program: str
    output: str

    def __post_init__(self):
        if self.stage < 0:
            raise MachineTapeError(f"negative stage {self.stage}")
        _check_binary(self.program, "program")
        _check_binary(self.output, "output")

    def to_json(self):
        return {"stage": self.stage, "program": self.program, "output": self.output}


class MachineTape:
    """Stage-ordered accepted events with a prefix-free domain.

    Programs are kept sorted, so an incoming program only has to be compared
    with its two neighbours: in a prefix-free sorted list a prefix of p can
    only sit immediately before p and an extension only immediately after.
    """

    def __init__(self, name="M"):
        self.name = name
        self.events = []
        self.rejected = []
        self._programs = []
        self._stages = []
        self._omega = []
        # output -> ([stage...], [running minimum length...])
        self._shortest = {}

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def last_stage(self):
        return self._stages[-1] if self._stages else -1

    @property
    def domain(self):
        return [event.program for event in self.events]

    def conflicts(self, program):
        """True when program is comparable with an already accepted program."""
        pos = bisect.bisect_left(self._programs, program)
        if pos < len(self._programs) and self._programs[pos].startswith(program):
            return True
        if pos > 0 and program.startswith(self._programs[pos - 1]):
            return True
        return False

    def accept(self, event):
        """Append one event; returns False (and records it) when prefix-freeness refuses it."""
        if event.stage < self.last_stage:
            raise MachineTapeError(
                f"{self.name}: event at stage {event.stage} arrives after stage {self.last_stage}"
            )
        if self.conflicts(event.program):
            self.rejected.append(event)
            update_terminal_log(
                f"{self.name}: rejected {event.program!r} at stage {event.stage} (comparable with an accepted program)",
                "WARN",
            )
            return False

        bisect.insort(self._programs, event.program)
        previous = self._omega[-1] if self._omega else ZERO
        self.events.append(event)
        self._stages.append(event.stage)
        self._omega.append(previous + Dyadic.pow2(len(event.program)))

        stages, lengths = self._shortest.setdefault(event.output, ([], []))
        best = min(lengths[-1], len(event.program)) if lengths else len(event.program)
        stages.append(event.stage)
        lengths.append(best)
        return True

    def add(self, stage, program, output):
        return self.accept(DescriptionEvent(stage, program, output))

    def omega_at(self, stage):
        pos = bisect.bisect_right(self._stages, stage)
        return self._omega[pos - 1] if pos else ZERO

    def omega(self):
        return self._omega[-1] if self._omega else ZERO

    def complexity_at(self, target, stage):
        entry = self._shortest.get(target)
        if entry is None:
            return INFINITY
        stages, lengths = entry
        pos = bisect.bisect_right(stages, stage)
        return lengths[pos - 1] if pos else INFINITY

    def outputs(self, stage=None):
        if stage is None:
            return set(self._shortest)
        return {event.output for event in self.events if event.stage <= stage}

    def events_at(self, stage):
        lo = bisect.bisect_left(self._stages, stage)
        hi = bisect.bisect_right(self._stages, stage)
        return self.events[lo:hi]

    def events_upto(self, stage):
        return self.events[: bisect.bisect_right(self._stages, stage)]

    def to_records(self):
        return [event.to_json() for event in self.events]


def enforce_prefix_free(raw, name="M"):
    tape = MachineTape(name)
    for event in raw:
        if not isinstance(event, DescriptionEvent):
            event = DescriptionEvent(*event)
        tape.accept(event)
    if tape.rejected:
        update_terminal_log(f"{name}: {len(tape.rejected)} event(s) rejected for prefix-freeness", "INFO")
    return tape


def omega_at(tape, stage):
    return tape.omega_at(stage)


def complexity_at(tape, target, stage):
    return tape.complexity_at(target, stage)


def coder(e):
    """The code word 0^e 1 for component e."""
    return "0" * e + "1"


def adjoin_universal(components, name="U"):
    merged = []
    for e, component in enumerate(components):
        prefix = coder(e)
        for order, event in enumerate(component.events):
            merged.append((event.stage, e, order, DescriptionEvent(event.stage, prefix + event.program, event.output)))
    merged.sort(key=lambda item: item[:3])
    return enforce_prefix_free([item[3] for item in merged], name=name)


def footnote_pad(u, name="V"):
    """Even-length padding: V(p0) = V(p1) = U(p) for odd |p|, V(p) = U(p) otherwise."""
    padded = []
    for event in u.events:
        if len(event.program) % 2:
            padded.append(DescriptionEvent(event.stage, event.program + "0", event.output))
            padded.append(DescriptionEvent(event.stage, event.program + "1", event.output))
        else:
            padded.append(event)
    return enforce_prefix_free(padded, name=name)


# brute-force oracles

def is_prefix_free(programs):
    programs = list(programs)
    for i, p in enumerate(programs):
        for q in programs[i + 1:]:
            if p.startswith(q) or q.startswith(p):
                return False
    return True


def rescan_omega(tape, stage):
    total = ZERO
    for event in tape.events:
        if event.stage <= stage:
            total += Dyadic.pow2(len(event.program))
    return total


# length-lexicographic order on binary strings

def length_lex_strings(start_length=0):
    for n in count(start_length):
        for bits in product("01", repeat=n):
            yield "".join(bits)


def length_lex_rank(x):
    """Position of x in "", "0", "1", "00", ...; a computable bijection with the naturals."""
    _check_binary(x, "string")
    return (1 << len(x)) - 1 + (int(x, 2) if x else 0)


def length_lex_unrank(n):
    if n < 0:
        raise ValueError(f"negative rank {n}")
    length = (n + 1).bit_length() - 1
    offset = n - ((1 << length) - 1)
    return format(offset, "b").zfill(length) if length else ""


def length_lex_key(x):
    return (len(x), x)


def verify_adjunction_bound(universal, components, stage):
    """K_U(tau)[stage] <= K_{M_e}(tau)[stage] + e + 1 for every output of every component."""
    for e, component in enumerate(components):
        for target in sorted(component.outputs(stage), key=length_lex_key):
            bound = component.complexity_at(target, stage) + e + 1
            if universal.complexity_at(target, stage) > bound:
                return Verdict(
                    False,
                    stage,
                    f"K_U({target!r}) = {universal.complexity_at(target, stage)} exceeds K_M{e} + {e + 1} = {bound}",
                )
    return Verdict(True)


def verify_tape(tape, horizon=None):
    """Prefix-freeness, Omega <= 1, and Omega[s] equal to a running re-sum at every event stage."""
    if not is_prefix_free(tape.domain):
        return Verdict(False, None, f"{tape.name}: domain is not prefix-free")
    running = ZERO
    for index, event in enumerate(tape.events):
        if horizon is not None and event.stage > horizon:
            break
        running += Dyadic.pow2(len(event.program))
        if running > 1:
            return Verdict(False, event.stage, f"{tape.name}: Omega exceeds 1 at stage {event.stage}")
        last_of_stage = index + 1 == len(tape.events) or tape.events[index + 1].stage != event.stage
        if last_of_stage and tape.omega_at(event.stage) != running:
            return Verdict(False, event.stage, f"{tape.name}: Omega[{event.stage}] disagrees with re-sum")
    return Verdict(True)
