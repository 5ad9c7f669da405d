"""
Kraft-Chaitin allocation: turning a stream of weight requests 2^-n into a
prefix-free machine, and a left-c.e. real into a machine with that halting
probability.
"""

import bisect
from dataclasses import dataclass
from typing import Optional

from dyadic import Dyadic, ZERO, ONE
from machines import DescriptionEvent, MachineTape, length_lex_unrank
from utils import InputContractError

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


class KraftChaitinError(InputContractError):
    """A request weight that is not 2^-n, or a real outside [0, 1]."""


@dataclass(frozen=True)
class Request:
    weight: Dyadic
    target: Optional[str] = None
    stage: int = 0

    @property
    def length(self):
        weight = Dyadic.parse(self.weight)
        if not weight.is_power_of_two() or weight > ONE:
            raise KraftChaitinError(f"request weight must be 2^-n with n >= 0, got {weight}")
        return weight.exponent


def fresh_output(k):
    """The k-th binary string in length-lex order, used as a throwaway output token."""
    return length_lex_unrank(k)


class KraftChaitinAllocator:
    """Keeps the unallocated part of [0, 1) as at most one free interval per length.

    The free intervals mirror the binary expansion of the free measure. A
    request for length n takes the free interval of length n if there is one,
    otherwise splits the smallest larger free interval: its left end goes to
    the request and the rest becomes one new free interval at every length
    in between.
    """

    def __init__(self, name="M"):
        self.tape = MachineTape(name)
        self.granted = []
        self.rejected = []
        self._free = {0: ""}
        self._free_lengths = [0]
        self._fresh = 0

    @property
    def free_measure(self):
        total = ZERO
        for length in self._free_lengths:
            total += Dyadic.pow2(length)
        return total

    def free_intervals(self):
        return [self._free[length] for length in self._free_lengths]

    def _take(self, length):
        program = self._free.pop(length)
        self._free_lengths.remove(length)
        return program

    def _put(self, program):
        self._free[len(program)] = program
        bisect.insort(self._free_lengths, len(program))

    def _allocate(self, n):
        if n in self._free:
            return self._take(n)
        pos = bisect.bisect_left(self._free_lengths, n)
        if pos == 0:
            return None
        parent = self._take(self._free_lengths[pos - 1])
        for depth in range(len(parent), n):
            self._put(parent + "0" * (depth - len(parent)) + "1")
        return parent + "0" * (n - len(parent))

    def request(self, weight, target=None, stage=0):
        req = weight if isinstance(weight, Request) else Request(Dyadic.parse(weight), target, stage)
        n = req.length
        program = self._allocate(n)
        if program is None:
            self.rejected.append(req)
            update_terminal_log(
                f"Kraft-Chaitin: request 2^-{n} at stage {req.stage} exceeds the free measure {self.free_measure}",
                "WARN",
            )
            return None

        output = req.target
        if output is None:
            output = fresh_output(self._fresh)
            self._fresh += 1
        event = DescriptionEvent(req.stage, program, output)
        self.tape.accept(event)
        self.granted.append((req, program))
        update_terminal_log(f"Kraft-Chaitin: granted {program!r} for 2^-{n}", "DEBUG")
        return program


def kc_allocate(requests, name="M"):
    allocator = KraftChaitinAllocator(name)
    for item in requests:
        if isinstance(item, Request):
            allocator.request(item)
        elif isinstance(item, tuple):
            allocator.request(Request(Dyadic.parse(item[0]), *item[1:]))
        else:
            allocator.request(Dyadic.parse(item))
    return allocator.tape


def increment_requests(delta, stage):
    """Power-of-two requests summing exactly to a dyadic increment in [0, 1]."""
    if delta < 0:
        raise KraftChaitinError(f"negative increment {delta} at stage {stage}")
    return [Request(Dyadic.pow2(n), None, stage) for n in delta.binary_expansion()]


def real_to_machine(alpha, horizon, name="M"):
    """A machine M with Omega_M[s] = alpha_s for every s <= horizon."""
    allocator = KraftChaitinAllocator(name)
    previous = ZERO
    for stage in range(horizon + 1):
        value = alpha.value(stage)
        if value < ZERO or value > ONE:
            raise KraftChaitinError(f"alpha_{stage} = {value} lies outside [0, 1]")
        for req in increment_requests(value - previous, stage):
            allocator.request(req)
        previous = value
    if allocator.rejected:
        update_terminal_log(f"{name}: {len(allocator.rejected)} request(s) rejected", "ERROR")
    return allocator.tape


def brute_force_pack(lengths):
    """Exhaustive packer for small cases: can the lengths be given pairwise-incomparable programs?"""
    chosen = []

    def place(index):
        if index == len(lengths):
            return True
        n = lengths[index]
        for k in range(1 << n):
            candidate = format(k, "b").zfill(n) if n else ""
            if all(not (c.startswith(candidate) or candidate.startswith(c)) for c in chosen):
                chosen.append(candidate)
                if place(index + 1):
                    return True
                chosen.pop()
        return False

    return place(0)
