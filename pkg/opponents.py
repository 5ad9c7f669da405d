"""
Opponent machines for the diagonalization.

An opponent stands in for the machine a hypothetical uniform procedure would
build from alpha. The construction pulls from it: at stage s it calls
advance(s, alpha_{s-1}), after which gamma(s) and complexity(x, s) are frozen.
"""

import os
import random
from abc import ABC, abstractmethod

from dyadic import Dyadic, ZERO, ONE
from kraft_chaitin import KraftChaitinAllocator, increment_requests
from machines import MachineTape
from utils import InputContractError

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


class OpponentContractError(InputContractError):
    """The opponent's measure decreased, exceeded 1, or it was driven backwards in stages."""


class OpponentMachine(ABC):
    """Abstract base class for opponents."""

    label = "opponent"

    def __init__(self, name="M"):
        self.name = name
        self.stage = -1
        self._allocator = KraftChaitinAllocator(name)

    @property
    def tape(self):
        return self._allocator.tape

    def advance(self, stage, alpha_prev):
        """Freeze the opponent's events for every stage up to and including `stage`."""
        if stage < self.stage:
            raise OpponentContractError(f"{self.name}: asked for stage {stage} after stage {self.stage}")
        before = len(self.tape)
        previous_gamma = self.gamma(self.stage) if self.stage >= 0 else ZERO
        while self.stage < stage:
            self.stage += 1
            self._play(self.stage, Dyadic.parse(alpha_prev))
        gamma = self.gamma(stage)
        if gamma < previous_gamma or gamma > ONE:
            raise OpponentContractError(f"{self.name}: gamma_{stage} = {gamma} after {previous_gamma}")
        return self.tape.events[before:]

    @abstractmethod
    def _play(self, stage, alpha_prev):
        pass

    def gamma(self, stage):
        return self.tape.omega_at(stage)

    def complexity(self, x, stage):
        return self.tape.complexity_at(x, stage)

    def events_at(self, stage):
        return self.tape.events_at(stage)

    def _request_all(self, amount, stage, targets=None):
        for position, req in enumerate(increment_requests(amount, stage)):
            target = targets[position] if targets and position < len(targets) else None
            self._allocator.request(req.weight, target, stage)

    def describe(self):
        return self.label


class StallingOpponent(OpponentMachine):
    """Never converges: gamma stays 0."""

    label = "stalling"

    def _play(self, stage, alpha_prev):
        return None


class CopyingOpponent(OpponentMachine):
    """Tops its measure up to alpha_{s-1} at every stage."""

    label = "copying"

    def _play(self, stage, alpha_prev):
        if stage == 0:
            return
        gap = alpha_prev - self.tape.omega()
        if gap > 0:
            self._request_all(gap, stage)


class OvershootingOpponent(CopyingOpponent):
    """Copies until `at`, then pushes gamma past alpha_{s-1} by one power of two."""

    def __init__(self, at, name="M"):
        super().__init__(name)
        self.at = at
        self.label = f"overshoot:{at}"

    def _play(self, stage, alpha_prev):
        super()._play(stage, alpha_prev)
        if stage != self.at:
            return
        room = ONE - self.tape.omega()
        if room <= 0:
            update_terminal_log(f"{self.name}: no room left to overshoot at stage {stage}", "WARN")
            return
        n = 0
        while Dyadic.pow2(n) > room:
            n += 1
        self._allocator.request(Dyadic.pow2(n), None, stage)
        update_terminal_log(f"{self.name}: overshooting alpha at stage {stage}", "DEBUG")


class RandomizedOpponent(OpponentMachine):
    """Seeded mix of partial copies, stalls and a rare overshoot.

    Outputs are short random strings so that descriptions collide with the
    witnesses the construction picks.
    """

    def __init__(self, seed, name="M", stall_rate=0.3, overshoot_rate=0.002, max_output_length=3):
        super().__init__(name)
        self.seed = seed
        self.rng = random.Random(seed)
        self.stall_rate = stall_rate
        self.overshoot_rate = overshoot_rate
        self.max_output_length = max_output_length
        self.label = f"random:{seed}"

    def _random_output(self):
        length = self.rng.randint(0, self.max_output_length)
        return "".join(self.rng.choice("01") for _ in range(length))

    def _play(self, stage, alpha_prev):
        if stage == 0 or self.rng.random() < self.stall_rate:
            return
        gap = alpha_prev - self.tape.omega()
        if self.rng.random() < self.overshoot_rate:
            room = ONE - self.tape.omega()
            if room > gap:
                extra = room - gap
                n = 0
                while Dyadic.pow2(n) > extra:
                    n += 1
                gap += Dyadic.pow2(n)
        if gap <= 0:
            return
        for position, req in enumerate(increment_requests(gap, stage)):
            # partial copy: the largest piece always goes in
            if position and self.rng.random() < 0.5:
                continue
            self._allocator.request(req.weight, self._random_output(), stage)


class ScriptedOpponent(OpponentMachine):
    """Replays the events of a machine tape stage by stage."""

    def __init__(self, script, name="M"):
        super().__init__(name)
        self.script = script
        self.label = f"scripted:{script.name}"
        self._replay = MachineTape(name)

    @property
    def tape(self):
        return self._replay

    def _play(self, stage, alpha_prev):
        for event in self.script.events_at(stage):
            self._replay.accept(event)


def get_opponent_instance(spec, name="M"):
    """Factory: "stalling", "copying", "overshoot:<stage>", "random:<seed>", or a machine tape path."""
    opponent_map = {
        "stalling": StallingOpponent,
        "copying": CopyingOpponent,
    }
    text = str(spec).strip()
    kind, _, argument = text.partition(":")

    if kind in opponent_map and not argument:
        return opponent_map[kind](name=name)
    if kind == "overshoot":
        try:
            return OvershootingOpponent(int(argument), name=name)
        except ValueError as e:
            raise OpponentContractError(f"overshoot needs an integer stage, got {argument!r}") from e
    if kind == "random":
        try:
            return RandomizedOpponent(int(argument), name=name)
        except ValueError as e:
            raise OpponentContractError(f"random needs an integer seed, got {argument!r}") from e
    if os.path.exists(text):
        from parser import load_machine_tape
        return ScriptedOpponent(load_machine_tape(text, name=name), name=name)

    raise OpponentContractError(f"Opponent {text!r} not supported.")
