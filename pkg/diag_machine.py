"""
Diagonalization against an opponent machine.

Builds alpha from a fixed left-c.e. beta so that the opponent M is never an
optimal machine with Omega_M = alpha: requirements R_d each reserve a code
tau_d for an auxiliary machine Q and try to keep K_M(sigma_d) > K_Q(sigma_d) + d.
Also hosts the interval-restart wrapper that plays against a changing
sequence of opponents, and verifiers that replay a trace's events.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from dyadic import Dyadic, ZERO, ONE
from machines import MachineTape, is_prefix_free, length_lex_strings
from streams import (
    LeftCEStream,
    StreamContractError,
    affine,
    solovay_domination_check,
    solovay_witness_for_affine,
)
from traces import Trace, TraceRecord, Verdict, VerificationReport
from utils import StageTimer

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


CONSTRUCTION = "diag"
LAYERWISE = "layerwise"


class ReqState(str, Enum):
    INACTIVE = "inactive"
    PREPARING = "preparing"
    WAITING = "waiting"
    RESTRAINING = "restraining"


class Mode(str, Enum):
    RUNNING = "running"
    BAILOUT = "bailout"


def restraint(code, d):
    """r_d = 2^-(|tau_d| + d)."""
    return Dyadic.pow2(len(code) + d)


@dataclass
class Requirement:
    d: int
    state: ReqState = ReqState.INACTIVE
    code: Optional[str] = None
    restraint: Optional[Dyadic] = None
    q: Optional[Dyadic] = None
    l: Optional[Dyadic] = None
    witness: Optional[str] = None
    activated: Optional[int] = None
    incremental: int = 0


@dataclass
class DiagState:
    stage: int
    alpha: Dyadic
    beta: LeftCEStream
    base: LeftCEStream
    floor: Dyadic = ZERO
    ceiling: Dyadic = ONE
    requirements: List[Requirement] = field(default_factory=list)
    q_tape: MachineTape = field(default_factory=lambda: MachineTape("Q"))
    mode: Mode = Mode.RUNNING
    bailout_l: Optional[Dyadic] = None
    bailout_q: Optional[Dyadic] = None
    gamma: Dyadic = ZERO
    next_code: int = 0
    init_events: list = field(default_factory=list)

    @property
    def lowest(self):
        return self.requirements[-1]

    def incremental_counts(self):
        return {req.d: req.incremental for req in self.requirements}


def _reserve_code(state):
    # 0^n 1 with n never reused: pairwise incomparable, so Q stays prefix-free
    code = "0" * state.next_code + "1"
    state.next_code += 1
    return code


def _activate(state, d, stage, events):
    code = _reserve_code(state)
    req = Requirement(d, ReqState.PREPARING, code, restraint(code, d), activated=stage)
    state.requirements.append(req)
    events.append({"type": "activate", "d": d, "tau": code, "r": str(req.restraint)})
    update_terminal_log(f"R_{d} activated at stage {stage} with code {code!r}", "DEBUG")
    return req


def _check_beta(beta, label="beta"):
    for stage, value in enumerate(beta.values):
        if value < 0 or value >= 1:
            raise StreamContractError(f"{label}_{stage} = {value} must lie in [0, 1)")
    if beta.final() <= Dyadic(3, 2):
        update_terminal_log(f"{label} ends at {beta.final()}, not above 3/4 on this horizon", "WARN")


def diag_init(beta, alpha_floor=ZERO, stage=0, base=None, ceiling=ONE):
    """Stage-0 state: alpha at its floor, R_0 preparing, Q empty."""
    state = DiagState(
        stage=stage,
        alpha=Dyadic.parse(alpha_floor),
        beta=beta,
        base=base if base is not None else beta,
        floor=Dyadic.parse(alpha_floor),
        ceiling=Dyadic.parse(ceiling),
    )
    _activate(state, 0, stage, state.init_events)
    return state


def _values(state, stage, gamma):
    values = {"alpha": state.alpha, "beta": state.beta.value(stage), "gamma": gamma}
    if state.base is not state.beta:
        values["base_beta"] = state.base.value(stage)
        values["floor"] = state.floor
        values["width"] = state.ceiling - state.floor
    return values


def _record(state, stage, case, gamma, events, construction=CONSTRUCTION, extra_state=None):
    summary = {"mode": state.mode.value}
    if state.requirements:
        summary.update({
            "lowest": state.lowest.d,
            "lowest_state": state.lowest.state.value,
            "active": len(state.requirements),
        })
    if extra_state:
        summary.update(extra_state)
    return TraceRecord(stage, construction, case, summary, _values(state, stage, gamma), events)


def init_record(state, construction=CONSTRUCTION, extra_state=None, case="init"):
    events = list(state.init_events)
    state.init_events = []
    return _record(state, state.stage, case, state.gamma, events, construction, extra_state)


def _find_witness(opponent, bound, stage):
    """Least string in length-lex order with K_M(sigma)[stage] > bound."""
    for candidate in length_lex_strings():
        if opponent.complexity(candidate, stage) > bound:
            return candidate


def _cancel_below(state, keep, events):
    dropped = state.requirements[keep:]
    if not dropped:
        return
    del state.requirements[keep:]
    events.append({"type": "cancel", "from": keep, "count": len(dropped)})
    update_terminal_log(f"cancelled R_{keep}..R_{keep + len(dropped) - 1}", "DEBUG")


def _set_state(req, new_state, events):
    req.state = new_state
    events.append({"type": "state", "d": req.d, "state": new_state.value})


def _set_reference(state, req, alpha_prev, gamma, events):
    req.l = alpha_prev
    req.q = req.restraint - (alpha_prev - gamma)
    events.append({"type": "reference", "d": req.d, "q": str(req.q), "l": str(req.l)})
    if req.q <= 0:
        update_terminal_log(f"R_{req.d}: reference q = {req.q} is not positive", "ERROR")


def diag_step(state, opponent, beta=None, construction=CONSTRUCTION, extra_state=None):
    """Run stage state.stage + 1; returns the updated state and its trace record."""
    if beta is not None:
        state.beta = beta
    s = state.stage + 1
    alpha_prev = state.alpha
    events = []

    if state.mode is Mode.BAILOUT:
        state.stage = s
        state.alpha = state.bailout_l + state.bailout_q * state.base.value(s)
        return state, _record(state, s, "bailout", state.gamma, events, construction, extra_state)

    for event in opponent.advance(s, alpha_prev):
        events.append({"type": "opponent", "program": event.program, "output": event.output})
    gamma = opponent.gamma(s)
    state.gamma = gamma
    target = state.beta.value(s)
    state.stage = s

    if gamma > alpha_prev:
        cap = min(gamma, state.ceiling)
        state.mode = Mode.BAILOUT
        state.bailout_l = alpha_prev
        state.bailout_q = cap - alpha_prev
        state.alpha = state.bailout_l + state.bailout_q * state.base.value(s)
        events.append({
            "type": "bailout",
            "l": str(state.bailout_l),
            "q": str(state.bailout_q),
            "gamma": str(gamma),
        })
        update_terminal_log(f"bailout at stage {s}: gamma {gamma} exceeds alpha {alpha_prev}", "INFO")
        return state, _record(state, s, "bailout", gamma, events, construction, extra_state)

    gap = target - gamma

    # r_d strictly decreases along the active prefix, so gap >= r_d is monotone in d
    reqs = state.requirements
    lo, hi = 0, len(reqs)
    while lo < hi:
        mid = (lo + hi) // 2
        if gap >= reqs[mid].restraint:
            hi = mid
        else:
            lo = mid + 1
    if lo < len(reqs):
        _cancel_below(state, lo + 1, events)

    req = state.lowest
    d = req.d
    r = req.restraint

    if req.state is ReqState.PREPARING:
        case = "1"
        state.alpha = target
        if gap < r:
            sigma = _find_witness(opponent, len(req.code) + d, s)
            state.q_tape.add(s, req.code, sigma)
            req.witness = sigma
            events.append({"type": "q", "d": d, "tau": req.code, "sigma": sigma})
            _set_state(req, ReqState.WAITING, events)
        elif gap == r:
            update_terminal_log(f"R_{d}: beta - gamma equals r_d at stage {s}; stays preparing", "DEBUG")

    elif req.state is ReqState.WAITING and gap < r:
        case = "2"
        state.alpha = target
        _activate(state, d + 1, s, events)

    elif req.state is ReqState.WAITING:
        case = "3"
        _set_reference(state, req, alpha_prev, gamma, events)
        _set_state(req, ReqState.RESTRAINING, events)
        state.alpha = req.q * target + req.l

    else:
        case = "4"
        if gamma > req.l + req.q.half():
            req.incremental += 1
            events.append({"type": "incremental", "d": d, "count": req.incremental})
            if gap < r:
                state.alpha = target
                _set_state(req, ReqState.WAITING, events)
            else:
                _set_reference(state, req, alpha_prev, gamma, events)
                state.alpha = req.q * target + req.l
        else:
            state.alpha = req.q * target + req.l

    return state, _record(state, s, case, gamma, events, construction, extra_state)


def run_diag(opponent, beta, stages):
    if stages < 1:
        raise ValueError(f"run_diag needs at least one stage, got {stages}")
    _check_beta(beta)
    trace = Trace(header={
        "construction": CONSTRUCTION,
        "stages": stages,
        "opponent": opponent.describe(),
        "beta_horizon": beta.horizon,
    })
    state = diag_init(beta)
    trace.append(init_record(state))

    with StageTimer(f"Diagonalization against {opponent.describe()} ({stages} stages)"):
        for _ in range(stages):
            state, record = diag_step(state, opponent)
            trace.append(record)

    settled = sum(1 for req in state.requirements if req.state is not ReqState.PREPARING)
    update_terminal_log(
        f"diag: mode {state.mode.value}, {len(state.requirements)} active requirement(s), "
        f"{settled} past preparing, Q has {len(state.q_tape)} description(s)",
        "INFO",
    )
    trace.final_state = state
    return trace


def _resolve(source, key):
    return source(key) if callable(source) else source[key]


def run_layerwise_diag(opponent_index, opponents, xi, stages, beta):
    """Restart the diagonalization inside [xi_i, xi_{i+1}] whenever the opponent index changes."""
    if stages < 1:
        raise ValueError(f"run_layerwise_diag needs at least one stage, got {stages}")
    _check_beta(beta)
    for i in range(1, len(xi.values)):
        if not xi.values[i] > xi.values[i - 1]:
            raise StreamContractError(f"xi must be strictly increasing; xi_{i} = {xi.values[i]}")

    trace = Trace(header={
        "construction": LAYERWISE,
        "stages": stages,
        "xi": [str(v) for v in xi.values],
    })

    segment = 0
    index = _resolve(opponent_index, 0)
    state = None
    opponent = None

    def start_segment(stage, alpha_now):
        floor = xi.value(segment)
        ceiling = xi.value(segment + 1)
        target = affine(beta, ceiling - floor, floor)
        new_state = diag_init(target, alpha_floor=floor, stage=stage, base=beta, ceiling=ceiling)
        new_state.init_events.insert(0, {
            "type": "restart",
            "segment": segment,
            "index": index,
            "floor": str(floor),
            "ceiling": str(ceiling),
        })
        if floor < alpha_now:
            update_terminal_log(f"restart floor {floor} is below alpha {alpha_now}", "ERROR")
        return new_state

    with StageTimer(f"Layerwise diagonalization ({stages} stages)"):
        for s in range(stages + 1):
            current = _resolve(opponent_index, s)
            if state is None or current != index:
                if state is not None:
                    segment += 1
                    index = current
                if segment + 1 > xi.horizon:
                    trace.halt(s, f"xi ladder exhausted: segment {segment} needs xi_{segment + 1}")
                    break
                state = start_segment(s, state.alpha if state is not None else ZERO)
                opponent = _resolve(opponents, index)
                update_terminal_log(f"segment {segment} against opponent {index} from stage {s}", "INFO")
                trace.append(init_record(state, LAYERWISE, {"segment": segment, "index": index}, case="restart"))
                continue
            state, record = diag_step(state, opponent, construction=LAYERWISE,
                                      extra_state={"segment": segment, "index": index})
            trace.append(record)

    trace.final_state = state
    return trace


class _DiagReplay:
    """Re-derives requirement states from a trace's events and collects first violations."""

    CHECKS = (
        "alpha_monotone",
        "alpha_below_beta",
        "restraint_respected",
        "single_non_waiting",
        "incremental_bound",
        "incremental_growth",
        "successive_increment",
        "witness_protection",
        "settled_witnesses",
        "q_prefix_free",
        "bailout_closed_form",
        "bailout_soundness",
        "final_segment_solovay",
    )

    def __init__(self):
        self.failures = {}
        self.active = []
        self.non_waiting = 0
        self.q_programs = {}
        self.shortest = {}
        self.protected = {}
        self.mode = Mode.RUNNING
        self.bailout = None
        self.previous = None
        self.records = []

    def fail(self, name, stage, detail):
        if name not in self.failures:
            self.failures[name] = Verdict(False, stage, detail)

    def _non_preparing_min_restraint(self):
        for req in reversed(self.active):
            if req["state"] != ReqState.PREPARING.value:
                return req["r"]
        return None

    def _protect(self, req, stage):
        self.protected.setdefault(req["sigma"], []).append((req["d"], len(req["tau"]) + req["d"], stage))

    def _unprotect(self, req):
        entries = self.protected.get(req.get("sigma"), [])
        entries[:] = [entry for entry in entries if entry[0] != req["d"]]

    def feed(self, record):
        stage = record.stage
        alpha = record.values["alpha"]
        beta = record.values["beta"]
        gamma = record.values.get("gamma", ZERO)
        previous = self.previous
        restraint_before = self._non_preparing_min_restraint()

        for event in record.events:
            kind = event.get("type")
            if kind == "opponent":
                program, output = event["program"], event["output"]
                best = self.shortest.get(output)
                self.shortest[output] = len(program) if best is None else min(best, len(program))
                if record.case != "bailout":
                    for d, bound, since in self.protected.get(output, []):
                        if since < stage and len(program) <= bound:
                            self.fail("witness_protection", stage,
                                      f"opponent described sigma_{d} = {output!r} with length {len(program)} <= {bound}")
            elif kind == "activate":
                r = Dyadic.parse(event["r"])
                if r != restraint(event["tau"], event["d"]):
                    self.fail("restraint_respected", stage, f"R_{event['d']} has r = {r}, expected 2^-(|tau| + d)")
                if self.active and not r < self.active[-1]["r"]:
                    self.fail("restraint_respected", stage, f"R_{event['d']} restraint {r} does not decrease")
                self.active.append({
                    "d": event["d"], "tau": event["tau"], "r": r,
                    "state": ReqState.PREPARING.value, "incremental": 0, "last_gamma": None,
                })
                self.non_waiting += 1
            elif kind == "cancel":
                for req in self.active[event["from"]:]:
                    self._unprotect(req)
                    if req["state"] != ReqState.WAITING.value:
                        self.non_waiting -= 1
                del self.active[event["from"]:]
            elif kind == "q":
                if event["tau"] in self.q_programs:
                    self.fail("q_prefix_free", stage, f"Q converged twice on {event['tau']!r}")
                self.q_programs[event["tau"]] = event["sigma"]
                req = self._find(event["d"])
                if req is not None:
                    req["sigma"] = event["sigma"]
            elif kind == "state":
                req = self._find(event["d"])
                if req is not None:
                    if req["state"] == ReqState.PREPARING.value and "sigma" in req:
                        self._protect(req, stage)
                    was_waiting = req["state"] == ReqState.WAITING.value
                    now_waiting = event["state"] == ReqState.WAITING.value
                    self.non_waiting += int(was_waiting) - int(now_waiting)
                    req["state"] = event["state"]
            elif kind == "reference":
                req = self._find(event["d"])
                if req is not None:
                    req["q"] = Dyadic.parse(event["q"])
                    req["l"] = Dyadic.parse(event["l"])
                    if not req["q"] > 0:
                        self.fail("restraint_respected", stage, f"R_{event['d']} has q = {req['q']}")
            elif kind == "incremental":
                req = self._find(event["d"])
                if req is not None:
                    req["incremental"] += 1
                    if req["incremental"] * req["r"] > 2:
                        self.fail("incremental_bound", stage,
                                  f"R_{event['d']} has {req['incremental']} incremental stages, bound 2/r = {2 / req['r'].to_fraction()}")
                    if req["last_gamma"] is not None and gamma < req["last_gamma"] + req["r"].half():
                        self.fail("incremental_growth", stage,
                                  f"gamma grew only {gamma - req['last_gamma']} since R_{event['d']}'s last incremental stage")
                    req["last_gamma"] = gamma
            elif kind == "bailout":
                self.mode = Mode.BAILOUT
                self.bailout = (Dyadic.parse(event["l"]), Dyadic.parse(event["q"]), Dyadic.parse(event["gamma"]))

        if previous is not None and alpha < previous.values["alpha"]:
            self.fail("alpha_monotone", stage, f"alpha drops from {previous.values['alpha']} to {alpha}")

        if self.mode is Mode.BAILOUT:
            l, q, bail_gamma = self.bailout
            base = record.values.get("base_beta", beta)
            if alpha != l + q * base:
                self.fail("bailout_closed_form", stage, f"alpha {alpha} != {l} + {q} * {base}")
            if not alpha < bail_gamma:
                self.fail("bailout_soundness", stage, f"alpha {alpha} is not below gamma {bail_gamma}")
        else:
            if alpha > beta:
                self.fail("alpha_below_beta", stage, f"alpha {alpha} > beta {beta}")
            # restraints decrease with d, so the lowest non-preparing one is binding
            binding = self._non_preparing_min_restraint()
            if binding is not None and not alpha - gamma < binding:
                self.fail("restraint_respected", stage,
                          f"alpha - gamma = {alpha - gamma} >= r = {binding} of a non-preparing requirement")
            lowest_non_waiting = bool(self.active) and self.active[-1]["state"] != ReqState.WAITING.value
            if self.non_waiting > int(lowest_non_waiting):
                self.fail("single_non_waiting", stage, "a requirement above the lowest is not waiting")
            if (previous is not None and record.case not in ("init", "restart")
                    and restraint_before is not None):
                step = gamma - previous.values.get("gamma", ZERO)
                if not step < restraint_before:
                    self.fail("successive_increment", stage,
                              f"gamma grew by {step} while a requirement with r = {restraint_before} was protected")

        self.previous = record
        self.records.append(record)

    def _find(self, d):
        if d < len(self.active) and self.active[d]["d"] == d:
            return self.active[d]
        for req in self.active:
            if req["d"] == d:
                return req
        return None

    def finish(self):
        if not is_prefix_free(self.q_programs):
            self.fail("q_prefix_free", None, "Q's domain is not prefix-free")

        if self.mode is Mode.RUNNING and self.records:
            end = self.records[-1].stage
            for req in self.active:
                if req["state"] == ReqState.PREPARING.value or "sigma" not in req:
                    continue
                sigma, tau, d = req["sigma"], req["tau"], req["d"]
                if self.q_programs.get(tau) != sigma:
                    self.fail("settled_witnesses", end, f"K_Q(sigma_{d}) > |tau_{d}|")
                k_m = self.shortest.get(sigma)
                if k_m is not None and k_m <= len(tau) + d:
                    self.fail("settled_witnesses", end, f"K_M(sigma_{d}) = {k_m} <= {len(tau) + d}")

        self._final_segment()

    def _final_segment(self):
        if len(self.records) < 2:
            return
        last = self.records[-1]
        floor = last.values.get("floor", ZERO)
        width = last.values.get("width", ONE)
        if self.mode is Mode.BAILOUT:
            l, q, _ = self.bailout
            coef, offset = q, l
        else:
            lowest = self.active[-1] if self.active else None
            if lowest is not None and lowest["state"] == ReqState.RESTRAINING.value and "q" in lowest:
                coef, offset = lowest["q"] * width, lowest["q"] * floor + lowest["l"]
            else:
                coef, offset = width, floor
        if not coef > 0:
            self.fail("final_segment_solovay", last.stage, f"final affine coefficient {coef} is not positive")
            return

        suffix = []
        for record in reversed(self.records):
            base = record.values.get("base_beta", record.values["beta"])
            if record.values["alpha"] != coef * base + offset:
                break
            suffix.append((base, record.values["alpha"]))
        suffix.reverse()
        if len(suffix) < 2:
            return
        n = solovay_witness_for_affine(coef)
        base_stream = LeftCEStream([b for b, _ in suffix])
        alpha_stream = LeftCEStream([a for _, a in suffix])
        verdict = solovay_domination_check(base_stream, alpha_stream, n, len(suffix) - 1)
        if not verdict:
            self.fail("final_segment_solovay", last.stage, verdict.detail)

    def into(self, report, prefix=""):
        for name in self.CHECKS:
            report.record(prefix + name, self.failures.get(name, Verdict(True)))
        return report


def verify_diag_claims(trace):
    report = VerificationReport(CONSTRUCTION)
    replay = _DiagReplay()
    for record in trace.records:
        replay.feed(record)
    replay.finish()
    replay.into(report)
    report.log_summary()
    return report


def verify_layerwise(trace):
    report = VerificationReport(LAYERWISE)
    xi = [Dyadic.parse(v) for v in trace.header.get("xi", [])]

    restarts = Verdict(True)
    monotone = Verdict(True)
    confined = Verdict(True)
    ladder = Verdict(True)
    segments = []
    previous = None
    changes = 0

    for record in trace.records:
        is_restart = bool(record.events_of("restart"))
        index = record.state.get("index")
        if previous is not None:
            changed = index != previous.state.get("index")
            if changed != is_restart and restarts:
                restarts = Verdict(False, record.stage, f"index {previous.state.get('index')} -> {index}, restart={is_restart}")
            if is_restart:
                changes += 1
            if record.values["alpha"] < previous.values["alpha"] and monotone:
                monotone = Verdict(False, record.stage, f"alpha drops at a stage {record.stage}")
        if is_restart:
            segments.append(_DiagReplay())
        if segments:
            segments[-1].feed(record)

        floor = record.values.get("floor", ZERO)
        width = record.values.get("width", ONE)
        alpha = record.values["alpha"]
        if confined and not floor <= alpha <= floor + width:
            confined = Verdict(False, record.stage, f"alpha {alpha} outside [{floor}, {floor + width}]")
        if ladder and changes < len(xi) and alpha < xi[changes]:
            ladder = Verdict(False, record.stage, f"alpha {alpha} < xi_{changes} = {xi[changes]}")
        previous = record

    report.record("restarts_match_index_changes", restarts)
    report.record("alpha_globally_nondecreasing", monotone)
    report.record("segment_confinement", confined)
    report.record("xi_ladder_bound", ladder)
    if trace.halted is not None:
        report.record("xi_ladder_not_exhausted", False, trace.halted.get("stage"), trace.halted.get("reason", ""))

    for number, replay in enumerate(segments):
        replay.finish()
        replay.into(report, prefix=f"segment{number}.")
    report.log_summary()
    return report
