"""
Left-c.e. discrete semi-measures as increment logs, the weighted mixture,
and the uniform construction of a semi-measure with a prescribed sum together
with its Martin-Loef test side channel.
"""

import bisect
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from dyadic import Dyadic, ZERO, ONE
from traces import Trace, TraceRecord, Verdict, VerificationReport
from utils import InputContractError, DEFAULT_KMAX, StageTimer

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


CONSTRUCTION = "semimeasure"


class SemiMeasureError(InputContractError):
    """Non-positive amounts, out-of-order stages, or a total above 1."""


class SemiMeasureTape:
    """Stage-ordered (stage, index, amount) increments."""

    def __init__(self, name="m"):
        self.name = name
        self.increments = []
        self._stages = []
        self._totals = []
        # index -> ([stage...], [cumulative mass...])
        self._mass = {}

    def __len__(self):
        return len(self.increments)

    @property
    def last_stage(self):
        return self._stages[-1] if self._stages else -1

    def add(self, stage, index, amount):
        amount = Dyadic.parse(amount)
        if amount <= 0:
            raise SemiMeasureError(f"{self.name}: amount must be positive, got {amount} for index {index}")
        if index < 0:
            raise SemiMeasureError(f"{self.name}: negative index {index}")
        if stage < self.last_stage:
            raise SemiMeasureError(f"{self.name}: increment at stage {stage} after stage {self.last_stage}")
        total = (self._totals[-1] if self._totals else ZERO) + amount
        if total > ONE:
            raise SemiMeasureError(f"{self.name}: total {total} exceeds 1 at stage {stage}")

        self.increments.append((stage, index, amount))
        self._stages.append(stage)
        self._totals.append(total)
        stages, masses = self._mass.setdefault(index, ([], []))
        masses.append((masses[-1] if masses else ZERO) + amount)
        stages.append(stage)

    def mass(self, index, stage):
        entry = self._mass.get(index)
        if entry is None:
            return ZERO
        stages, masses = entry
        pos = bisect.bisect_right(stages, stage)
        return masses[pos - 1] if pos else ZERO

    def total(self, stage):
        pos = bisect.bisect_right(self._stages, stage)
        return self._totals[pos - 1] if pos else ZERO

    def indices(self, stage=None):
        if stage is None:
            return sorted(self._mass)
        return sorted(i for i, (stages, _) in self._mass.items() if stages[0] <= stage)

    def to_records(self):
        return [{"stage": s, "index": i, "amount": str(a)} for s, i, a in self.increments]


@dataclass(frozen=True)
class TestInterval:
    stage: int
    lo: Dyadic
    hi: Dyadic

    @property
    def length(self):
        return self.hi - self.lo


class MLTestTape:
    """Levels k -> open dyadic intervals, each tagged with the stage it was enumerated."""

    def __init__(self):
        self.levels: Dict[int, List[TestInterval]] = {}

    def add(self, k, stage, lo, hi):
        self.levels.setdefault(k, []).append(TestInterval(stage, lo, hi))

    def intervals(self, k):
        return list(self.levels.get(k, []))

    def measure(self, k, stage=None):
        total = ZERO
        for interval in self.levels.get(k, []):
            if stage is None or interval.stage <= stage:
                total += interval.length
        return total

    def contains(self, k, x):
        return any(interval.lo < x < interval.hi for interval in self.levels.get(k, []))

    def to_records(self):
        return [
            {"k": k, "stage": interval.stage, "lo": str(interval.lo), "hi": str(interval.hi)}
            for k in sorted(self.levels)
            for interval in self.levels[k]
        ]


def mixture_universal(components, name="m"):
    """m = sum over e of 2^-(e+1) * mu_e, merged stage by stage."""
    merged = []
    for e, component in enumerate(components):
        weight = Dyadic.pow2(e + 1)
        for order, (stage, index, amount) in enumerate(component.increments):
            merged.append((stage, e, order, index, weight * amount))
    merged.sort(key=lambda item: item[:3])
    m = SemiMeasureTape(name)
    for stage, _, _, index, amount in merged:
        m.add(stage, index, amount)
    return m


@dataclass
class Episode:
    """One pass of a level through steps 2 and 3 for a triggering index."""

    k: int
    index: int
    stage: int
    x: Dyadic
    lo: Dyadic
    hi: Dyadic
    gain: Dyadic = ZERO
    closed_stage: Optional[int] = None


@dataclass
class _Level:
    k: int
    tape: SemiMeasureTape
    step: int = 1
    entered: Optional[int] = None
    consumed: Dyadic = ZERO
    episode: Optional[Episode] = None
    last_seen: Dict[int, Dyadic] = field(default_factory=dict)
    last_stage: Dict[int, int] = field(default_factory=dict)


@dataclass
class SemiMeasureRun:
    m: SemiMeasureTape
    test: MLTestTape
    levels: Dict[int, SemiMeasureTape]
    consumed: Dict[int, List[Dyadic]]
    episodes: List[Episode]
    final_step: Dict[int, int]
    step1_entry: Dict[int, int]
    mu: SemiMeasureTape
    horizon: int

    @property
    def kmax(self):
        return len(self.levels)

    def __iter__(self):
        yield self.m
        yield self.test


def _credit(level, m, stage, alpha_now):
    delta = alpha_now - level.consumed
    if delta <= 0:
        return
    amount = delta.shift(level.k)
    level.tape.add(stage, level.episode.index, amount)
    m.add(stage, level.episode.index, amount)
    level.episode.gain += amount
    level.consumed = alpha_now


def _trigger(level, mu, stage):
    """Step 1: the index whose mass grew since it last triggered this level, least recently triggered first."""
    best = None
    for index in mu.indices(stage):
        if index > stage:
            break
        current = mu.mass(index, stage)
        if current > level.last_seen.get(index, ZERO):
            key = (level.last_stage.get(index, -1), index)
            if best is None or key < best[0]:
                best = (key, index, current)
    return best


def uniform_semimeasure_with_sum(alpha, mu, kmax=None, horizon=None):
    """Build m = m_1 + ... + m_kmax with m_k tracking 2^-k * alpha, and the test (U_k)."""
    kmax = DEFAULT_KMAX if kmax is None else kmax
    horizon = alpha.horizon if horizon is None else horizon
    if kmax < 1:
        raise SemiMeasureError(f"kmax must be at least 1, got {kmax}")

    m = SemiMeasureTape("m")
    test = MLTestTape()
    levels = [_Level(k, SemiMeasureTape(f"m_{k}")) for k in range(1, kmax + 1)]
    consumed = {level.k: [] for level in levels}
    episodes = []

    with StageTimer(f"Semi-measure construction (kmax={kmax}, horizon={horizon})"):
        previous_alpha = None
        for stage in range(horizon + 1):
            alpha_now = alpha.value(stage)
            if alpha_now < 0 or alpha_now > 1 or (previous_alpha is not None and alpha_now < previous_alpha):
                raise SemiMeasureError(f"alpha_{stage} = {alpha_now} is not a nondecreasing value in [0, 1]")
            previous_alpha = alpha_now

            for level in levels:
                if level.step == 3:
                    _credit(level, m, stage, alpha_now)
                    if alpha_now > level.episode.hi:
                        level.episode.closed_stage = stage
                        level.step = 1
                        level.entered = stage
                        level.episode = None

                if level.step == 1:
                    found = _trigger(level, mu, stage)
                    if found is not None:
                        _, index, current = found
                        x = current - level.last_seen.get(index, ZERO)
                        level.last_seen[index] = current
                        level.last_stage[index] = stage
                        hi = alpha_now + x.shift(level.k)
                        test.add(level.k, stage, alpha_now, hi)
                        level.episode = Episode(level.k, index, stage, x, alpha_now, hi)
                        episodes.append(level.episode)
                        level.step = 3
                        _credit(level, m, stage, alpha_now)
                        update_terminal_log(
                            f"m_{level.k}: index {index} triggered at stage {stage} with x = {x}", "DEBUG"
                        )

                consumed[level.k].append(level.consumed)

    update_terminal_log(
        f"Semi-measure run: {len(episodes)} trigger(s) across {kmax} level(s), m total {m.total(horizon)}",
        "INFO",
    )
    return SemiMeasureRun(
        m=m,
        test=test,
        levels={level.k: level.tape for level in levels},
        consumed=consumed,
        episodes=episodes,
        final_step={level.k: level.step for level in levels},
        step1_entry={level.k: level.entered for level in levels},
        mu=mu,
        horizon=horizon,
    )


@dataclass(frozen=True)
class DominationVerdict:
    strict: Verdict
    non_strict: Verdict

    @property
    def holds(self):
        return self.strict.holds

    @property
    def holds_non_strict(self):
        return self.non_strict.holds

    def __bool__(self):
        return self.strict.holds


def verify_domination(m, mu, j, horizon):
    """m(i) > 2^-j mu(i) at the horizon for every i with mu(i) > 0; the >= form is reported alongside."""
    strict = Verdict(True)
    non_strict = Verdict(True)
    for index in mu.indices(horizon):
        target = mu.mass(index, horizon).shift(j)
        if target <= 0:
            continue
        have = m.mass(index, horizon)
        if strict.holds and not have > target:
            strict = Verdict(False, horizon, f"m({index}) = {have} is not > 2^-{j} mu({index}) = {target}")
        if non_strict.holds and have < target:
            non_strict = Verdict(False, horizon, f"m({index}) = {have} < 2^-{j} mu({index}) = {target}")
    return DominationVerdict(strict, non_strict)


def verify_semimeasure_run(run, alpha, horizon=None):
    horizon = run.horizon if horizon is None else horizon
    report = VerificationReport(CONSTRUCTION)
    gamma = run.mu.total(horizon)

    # 1. test-measure bound
    bound_fail = None
    for k in range(1, run.kmax + 1):
        measure = run.test.measure(k, horizon)
        if measure > gamma.shift(k) or measure > Dyadic.pow2(k):
            bound_fail = Verdict(False, horizon, f"U_{k} has measure {measure} > 2^-{k} * {gamma}")
            break
    report.record("test_measure_bound", bound_fail or Verdict(True))

    # 2. per-level accounting at every stage
    accounting = Verdict(True)
    for k, tape in run.levels.items():
        for stage in range(horizon + 1):
            if tape.total(stage) != run.consumed[k][stage].shift(k):
                accounting = Verdict(
                    False, stage, f"sum m_{k} = {tape.total(stage)} != 2^-{k} * {run.consumed[k][stage]}"
                )
                break
        if not accounting:
            break
    report.record("per_level_accounting", accounting)

    # 3. sum identity at the horizon
    expected = ZERO
    for k in run.levels:
        expected += run.consumed[k][horizon].shift(k)
    total = run.m.total(horizon)
    alpha_h = alpha.value(horizon)
    quiescent = all(run.consumed[k][horizon] == alpha_h for k in run.levels)
    detail = f"sum m = {total}"
    if quiescent:
        detail += f"; quiescent, alpha * (1 - 2^-{run.kmax}) = {alpha_h - alpha_h.shift(run.kmax)}"
        ok = total == expected == alpha_h - alpha_h.shift(run.kmax)
    else:
        ok = total == expected
    report.record("sum_identity", ok, horizon, detail if ok else f"{detail} != {expected}")

    # 4. every closed episode gained more than 2^-k of its interval length
    gain = Verdict(True)
    for episode in run.episodes:
        if episode.closed_stage is None or episode.closed_stage > horizon:
            continue
        if not episode.gain > (episode.hi - episode.lo).shift(episode.k):
            gain = Verdict(
                False, episode.closed_stage,
                f"m_{episode.k}({episode.index}) episode gained {episode.gain}, interval {episode.lo}..{episode.hi}",
            )
            break
    report.record("episode_gain", gain)

    # 5. levels whose intervals avoid the final alpha consumed all alpha up to their last step-1 entry
    avoidance = Verdict(True)
    for k, tape in run.levels.items():
        if run.step1_entry[k] is None or run.test.contains(k, alpha_h) or run.final_step[k] != 1:
            continue
        entry_alpha = alpha.value(run.step1_entry[k])
        if tape.total(horizon) != entry_alpha.shift(k):
            avoidance = Verdict(False, horizon, f"m_{k} sums to {tape.total(horizon)}, expected 2^-{k} * {entry_alpha}")
            break
    report.record("avoidance_full_consumption", avoidance)

    report.log_summary()
    return report


def semimeasure_trace(run, alpha):
    """One record per stage: alpha, the mass of m and of every m_k, and the measure of every U_k."""
    trace = Trace(header={"construction": CONSTRUCTION, "stages": run.horizon, "kmax": run.kmax})
    increments = {}
    for stage, index, amount in run.m.increments:
        increments.setdefault(stage, []).append({"type": "mass", "index": index, "amount": str(amount)})
    for k in range(1, run.kmax + 1):
        for interval in run.test.intervals(k):
            increments.setdefault(interval.stage, []).append(
                {"type": "interval", "k": k, "lo": str(interval.lo), "hi": str(interval.hi)}
            )

    for stage in range(run.horizon + 1):
        values = {"alpha": alpha.value(stage), "m_total": run.m.total(stage)}
        for k, tape in run.levels.items():
            values[f"m_{k}"] = tape.total(stage)
            values[f"consumed_{k}"] = run.consumed[k][stage]
            values[f"test_{k}"] = run.test.measure(k, stage)
        trace.append(TraceRecord(stage, CONSTRUCTION, "", {}, values, increments.get(stage, [])))
    trace.final_state = run
    return trace


def verify_semimeasure_trace(trace):
    """Stagewise re-check of the bound, the per-level accounting and the sum identity from a trace."""
    report = VerificationReport(CONSTRUCTION)
    kmax = int(trace.header.get("kmax", 0))

    bound = Verdict(True)
    accounting = Verdict(True)
    total = Verdict(True)
    for record in trace.records:
        values = record.values
        level_sum = ZERO
        for k in range(1, kmax + 1):
            if bound and values[f"test_{k}"] > Dyadic.pow2(k):
                bound = Verdict(False, record.stage, f"U_{k} has measure {values[f'test_{k}']} > 2^-{k}")
            if accounting and values[f"m_{k}"] != values[f"consumed_{k}"].shift(k):
                accounting = Verdict(False, record.stage, f"sum m_{k} != 2^-{k} * consumed")
            level_sum += values[f"m_{k}"]
        if total and values["m_total"] != level_sum:
            total = Verdict(False, record.stage, f"m total {values['m_total']} != sum over levels {level_sum}")

    report.record("test_measure_bound", bound)
    report.record("per_level_accounting", accounting)
    report.record("level_sum", total)

    if trace.records and kmax:
        last = trace.records[-1].values
        alpha_h = last["alpha"]
        if all(last[f"consumed_{k}"] == alpha_h for k in range(1, kmax + 1)):
            expected = alpha_h - alpha_h.shift(kmax)
            report.record(
                "quiescent_sum", last["m_total"] == expected, trace.records[-1].stage,
                f"sum m = {last['m_total']} != alpha * (1 - 2^-{kmax}) = {expected}",
            )
    report.log_summary()
    return report
