"""
From a machine U build a machine V with an exactly known Omega_U - Omega_V,
and combine U and V into W with Omega_W = (Omega_U + Omega_V) / 2.

V is driven by two parameters: a machine Q whose measure gamma is copied
under the first U-description, and a length function h on outputs whose
weights 2^-h(tau) are withheld for every output that gets a short
U-description.
"""

import bisect
import os
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from dyadic import Dyadic, ZERO
from machines import DescriptionEvent, MachineTape, length_lex_key, length_lex_rank, verify_tape
from traces import Trace, TraceRecord, Verdict, VerificationReport
from utils import InputContractError, MAX_REPLACEMENT_BITS, StageTimer

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


CONSTRUCTION = "omega-diff"

H_FORMULA = re.compile(r"^\s*(n|len)\s*(?:\+\s*(\d+))?\s*$")


class OmegaDiffError(InputContractError):
    """Bad h values or a U / Q tape that is not prefix-free."""


# h specifications

def h_from_spec(spec):
    """Build h from "n+K", "len+K", a dict table, a JSON table path, or a callable."""
    if callable(spec):
        return spec
    if isinstance(spec, dict):
        table = {str(key): int(value) for key, value in spec.items()}

        def h_table(tau):
            if tau not in table:
                raise OmegaDiffError(f"h is not defined on output {tau!r}")
            return table[tau]
        return h_table

    text = str(spec).strip()
    match = H_FORMULA.match(text)
    if match:
        base, offset = match.group(1), int(match.group(2) or 0)
        if base == "n":
            return lambda tau: length_lex_rank(tau) + offset
        return lambda tau: len(tau) + offset
    if os.path.exists(text):
        from parser import load_h_table
        return h_from_spec(load_h_table(text))
    raise OmegaDiffError(f"h specification {text!r} not understood (use n+K, len+K or a JSON table)")


def _h_value(h, tau):
    value = h(tau)
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise OmegaDiffError(f"h({tau!r}) = {value!r} is not a positive integer")
    return value


def replacement_programs(sigma, h_tau, max_bits=None):
    """Programs that stand in for a short description U(sigma) of an output with h(tau) = h_tau.

    sigma0 plus every length-h_tau extension of sigma1 except sigma1^(h_tau - |sigma|).
    Families wider than 2^max_bits are issued as the staircase sigma1^k0, 1 <= k < h_tau - |sigma|,
    which carries the same measure.
    """
    max_bits = MAX_REPLACEMENT_BITS if max_bits is None else max_bits
    free = h_tau - len(sigma) - 1
    programs = [sigma + "0"]
    if free > max_bits:
        update_terminal_log(
            f"replacement family for {sigma!r} has 2^{free} strings; issuing the staircase instead", "WARN"
        )
        programs.extend(sigma + "1" * k + "0" for k in range(1, free + 1))
        return programs
    omitted = sigma + "1" * (free + 1)
    for n in range(1 << free):
        program = sigma + "1" + (format(n, "b").zfill(free) if free else "")
        if program != omitted:
            programs.append(program)
    return programs


# ledger

@dataclass(frozen=True)
class LedgerSnapshot:
    stage: int
    c: Optional[int]
    gamma_share: Dyadic
    a_size: int
    withheld: Dyadic

    @property
    def expected_difference(self):
        if self.c is None:
            return ZERO
        weight = Dyadic.pow2(self.c + 1)
        return weight - weight * self.gamma_share + self.withheld


@dataclass
class DiffLedger:
    c: Optional[int] = None
    sigma0: Optional[str] = None
    tau0: Optional[str] = None
    gamma_share: Dyadic = ZERO
    a_set: Dict[str, dict] = field(default_factory=dict)
    withheld: Dyadic = ZERO
    pending: List[DescriptionEvent] = field(default_factory=list)
    snapshots: List[LedgerSnapshot] = field(default_factory=list)

    def take_snapshot(self, stage):
        snap = LedgerSnapshot(stage, self.c, self.gamma_share, len(self.a_set), self.withheld)
        self.snapshots.append(snap)
        return snap

    def at(self, stage):
        """Snapshot in force at `stage` (the last one taken at or before it)."""
        stages = [snap.stage for snap in self.snapshots]
        pos = bisect.bisect_right(stages, stage)
        if not pos:
            return LedgerSnapshot(stage, None, ZERO, 0, ZERO)
        return self.snapshots[pos - 1]

    def expected_difference(self):
        return self.snapshots[-1].expected_difference if self.snapshots else ZERO

    def to_records(self):
        return [
            {
                "stage": snap.stage,
                "c": snap.c,
                "gamma": str(snap.gamma_share),
                "a_size": snap.a_size,
                "withheld": str(snap.withheld),
                "expected": str(snap.expected_difference),
            }
            for snap in self.snapshots
        ]


# transformation

class _Transformer:
    def __init__(self, h, name, max_bits):
        self.h = h
        self.v = MachineTape(name)
        self.ledger = DiffLedger()
        self.max_bits = max_bits

    def _emit(self, stage, program, output, rule, events):
        if not self.v.add(stage, program, output):
            raise OmegaDiffError(f"{self.v.name}: {program!r} collides with an issued program")
        events.append({"type": "v", "program": program, "output": output, "rule": rule})

    def _copy_q(self, event, stage, events):
        self._emit(stage, self.ledger.sigma0 + "1" + event.program, event.output, "q", events)
        self.ledger.gamma_share += Dyadic.pow2(len(event.program))

    def process_u(self, event, stage, events):
        ledger = self.ledger
        sigma, tau = event.program, event.output
        events.append({"type": "u", "program": sigma, "output": tau})
        h_tau = _h_value(self.h, tau)

        if ledger.c is None:
            ledger.c, ledger.sigma0, ledger.tau0 = len(sigma), sigma, tau
            update_terminal_log(f"first description U({sigma!r}) = {tau!r}; c = {ledger.c}", "INFO")
            self._emit(stage, sigma + "0", tau, "first", events)
            for waiting in ledger.pending:
                self._copy_q(waiting, stage, events)
            ledger.pending.clear()
            return

        if tau != ledger.tau0 and tau not in ledger.a_set and len(sigma) < h_tau:
            ledger.a_set[tau] = {"stage": stage, "program": sigma, "h": h_tau}
            ledger.withheld += Dyadic.pow2(h_tau)
            for program in replacement_programs(sigma, h_tau, self.max_bits):
                self._emit(stage, program, tau, "replace", events)
            update_terminal_log(f"short description of {tau!r} (|sigma| = {len(sigma)} < h = {h_tau})", "DEBUG")
            return

        self._emit(stage, sigma, tau, "copy", events)

    def process_q(self, event, stage, events):
        if self.ledger.c is None:
            self.ledger.pending.append(event)
            return
        self._copy_q(event, stage, events)


def _check_input(tape, label):
    if tape.rejected:
        raise OmegaDiffError(f"{label} ({tape.name}) has {len(tape.rejected)} event(s) rejected for prefix-freeness")


def run_omega_diff(u, h, q, horizon=None, name="V", max_bits=None):
    """Transform U stage by stage; returns (v, ledger, trace)."""
    _check_input(u, "U")
    _check_input(q, "Q")
    h = h_from_spec(h)
    if horizon is None:
        horizon = max(u.last_stage, q.last_stage, 0)

    worker = _Transformer(h, name, max_bits)
    trace = Trace(header={"construction": CONSTRUCTION, "stages": horizon, "u": u.name, "q": q.name})

    with StageTimer(f"V transform of {u.name} ({len(u)} event(s), horizon {horizon})"):
        for stage in range(horizon + 1):
            events = []
            for event in u.events_at(stage):
                worker.process_u(event, stage, events)
            for event in q.events_at(stage):
                worker.process_q(event, stage, events)
            snap = worker.ledger.take_snapshot(stage)
            if not events and stage:
                continue
            trace.append(TraceRecord(
                stage, CONSTRUCTION, "first" if any(e.get("rule") == "first" for e in events) else "",
                {"c": snap.c, "a_size": snap.a_size, "pending": len(worker.ledger.pending)},
                {
                    "omega_u": u.omega_at(stage),
                    "omega_v": worker.v.omega_at(stage),
                    "gamma": snap.gamma_share,
                    "withheld": snap.withheld,
                    "expected": snap.expected_difference,
                },
                events,
            ))

    ledger = worker.ledger
    update_terminal_log(
        f"{name}: {len(worker.v)} description(s), |A| = {len(ledger.a_set)}, "
        f"Omega_U - Omega_V = {u.omega_at(horizon) - worker.v.omega_at(horizon)}",
        "INFO",
    )
    trace.final_state = ledger
    return worker.v, ledger, trace


def transform_v(u, h, q, horizon=None, name="V"):
    v, ledger, _ = run_omega_diff(u, h, q, horizon, name)
    return v, ledger


def combine_w(u, v, name="W"):
    """W(0 sigma) = U(sigma) and W(1 sigma) = V(sigma)."""
    merged = [(event.stage, 0, order, "0", event) for order, event in enumerate(u.events)]
    merged += [(event.stage, 1, order, "1", event) for order, event in enumerate(v.events)]
    merged.sort(key=lambda item: item[:3])
    w = MachineTape(name)
    for _, _, _, bit, event in merged:
        w.accept(DescriptionEvent(event.stage, bit + event.program, event.output))
    return w


# verification

def _optimality(u, v, stage, outputs):
    for tau in sorted(outputs, key=length_lex_key):
        k_u = u.complexity_at(tau, stage)
        k_v = v.complexity_at(tau, stage)
        if k_v > k_u + 1:
            return Verdict(False, stage, f"K_V({tau!r}) = {k_v} > K_U + 1 = {k_u + 1}")
    return Verdict(True)


def ledger_check(u, v, ledger, stage):
    """Difference identity and K_V <= K_U + 1 for every output U has described by `stage`."""
    snap = ledger.at(stage)
    actual = u.omega_at(stage) - v.omega_at(stage)
    expected = snap.expected_difference
    if actual != expected:
        return Verdict(False, stage, f"Omega_U - Omega_V = {actual}, ledger says {expected} (off by {actual - expected})")
    return _optimality(u, v, stage, u.outputs(stage))


def verify_combination(u, v, w, horizon=None):
    stages = sorted({event.stage for tape in (u, v, w) for event in tape.events})
    for stage in stages:
        if horizon is not None and stage > horizon:
            break
        if w.omega_at(stage) != (u.omega_at(stage) + v.omega_at(stage)).half():
            return Verdict(False, stage, f"Omega_W = {w.omega_at(stage)} is not the mean of Omega_U and Omega_V")
    return Verdict(True)


def verify_omega_diff(u, v, ledger, q=None, horizon=None):
    report = VerificationReport(CONSTRUCTION)
    report.record("v_prefix_free", verify_tape(v, horizon))

    identity = Verdict(True)
    optimal = Verdict(True)
    monotone = Verdict(True)
    copied = Verdict(True)
    previous = None
    for snap in ledger.snapshots:
        stage = snap.stage
        if horizon is not None and stage > horizon:
            break
        if identity:
            actual = u.omega_at(stage) - v.omega_at(stage)
            if actual != snap.expected_difference:
                identity = Verdict(False, stage, f"difference {actual} != ledger {snap.expected_difference}")
        if optimal:
            # only outputs described at this stage can have lost the bound
            optimal = _optimality(u, v, stage, {event.output for event in u.events_at(stage)})
        if monotone and previous is not None:
            if snap.a_size < previous.a_size or snap.withheld < previous.withheld:
                monotone = Verdict(False, stage, "A or the withheld sum shrank")
        if copied and q is not None and snap.c is not None and snap.gamma_share != q.omega_at(stage):
            copied = Verdict(False, stage, f"copied Q measure {snap.gamma_share} != gamma_Q = {q.omega_at(stage)}")
        previous = snap

    report.record("difference_identity", identity)
    report.record("optimality_plus_one", optimal)
    report.record("a_set_monotone", monotone)
    if q is not None:
        report.record("q_measure_copied", copied)
    report.record("w_mean", verify_combination(u, v, combine_w(u, v), horizon))
    report.log_summary()
    return report


def verify_omega_diff_trace(trace):
    """Rebuild U and V from the trace events and re-check the ledger values stage by stage."""
    u = MachineTape("U")
    v = MachineTape("V")
    snapshots = []
    for record in trace.records:
        for event in record.events:
            if event.get("type") == "u":
                u.add(record.stage, event["program"], event["output"])
            elif event.get("type") == "v":
                v.add(record.stage, event["program"], event["output"])
        snapshots.append(LedgerSnapshot(
            record.stage, record.state.get("c"), record.values["gamma"],
            int(record.state.get("a_size", 0)), record.values["withheld"],
        ))

    report = VerificationReport(CONSTRUCTION)
    recorded = Verdict(True)
    for record, snap in zip(trace.records, snapshots):
        if record.values["omega_u"] != u.omega_at(record.stage) or record.values["omega_v"] != v.omega_at(record.stage):
            recorded = Verdict(False, record.stage, "recorded Omega values disagree with the trace events")
            break
        if record.values["expected"] != snap.expected_difference:
            recorded = Verdict(False, record.stage, "recorded expected difference disagrees with c, gamma and withheld")
            break
    report.record("recorded_values", recorded)
    report.extend(verify_omega_diff(u, v, DiffLedger(snapshots=snapshots)))
    return report
