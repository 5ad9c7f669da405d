"""
The wait / follow(i) construction.

Builds a left-c.e. alpha and a right-c.e. delta from a supplied beta and a
finite family of right-c.e. reals theta^i, so that alpha differs from every
theta^i it can catch and either delta = alpha - beta or alpha eventually
grows at least as fast as beta.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from dyadic import Dyadic, ONE, ZERO
from streams import Direction, StreamContractError, ThetaFamily
from traces import Trace, TraceRecord, Verdict, VerificationReport
from utils import StageTimer

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


CONSTRUCTION = "diff"


class DiffMode(str, Enum):
    WAIT = "wait"
    FOLLOW = "follow"


@dataclass
class DiffState:
    stage: int
    alpha: Dyadic
    delta: Dyadic
    mode: DiffMode = DiffMode.WAIT
    index: Optional[int] = None

    @property
    def label(self):
        return self.mode.value if self.mode is DiffMode.WAIT else f"follow({self.index})"


def _epsilon(cap_exponent, slack):
    """min(2^-cap_exponent, slack) / 2: strictly positive and strictly below both bounds."""
    return min(Dyadic.pow2(cap_exponent), slack).half()


def diff_init(gamma_bootstrap, beta):
    if beta.direction is not Direction.NONDECREASING:
        raise StreamContractError("beta must be a nondecreasing stream")
    alpha0 = gamma_bootstrap.final()
    delta0 = ONE + alpha0 - beta.value(0)
    return DiffState(stage=0, alpha=alpha0, delta=delta0)


def _values(state, beta, thetas, stage):
    values = {"alpha": state.alpha, "beta": beta.value(stage), "delta": state.delta}
    for index, theta in enumerate(thetas.snapshot(stage)):
        values[f"theta_{index}"] = theta
    return values


def init_record(state, beta, thetas):
    return TraceRecord(
        0, CONSTRUCTION, "init",
        {"mode": "init", "next": state.label},
        _values(state, beta, thetas, 0),
        [],
    )


def diff_step(state, beta, thetas):
    """Run stage state.stage + 1; returns the updated state and its trace record."""
    s = state.stage
    t = s + 1
    mode_here = state.label
    events = []
    alpha_s, delta_s = state.alpha, state.delta
    beta_s, beta_t = beta.value(s), beta.value(t)
    if beta_t < beta_s:
        raise StreamContractError(f"beta decreases at stage {t}")

    if state.mode is DiffMode.WAIT:
        case = "wait"
        alpha_t = alpha_s
        delta_t = min(delta_s, alpha_t - beta_t + Dyadic.pow2(s))
        next_mode, next_index = DiffMode.WAIT, None
        for i in range(min(s, len(thetas) - 1) + 1):
            theta = thetas.value(i, t)
            if theta >= alpha_t and theta - alpha_t < Dyadic.pow2(i):
                next_mode, next_index = DiffMode.FOLLOW, i
                events.append({"type": "follow", "index": i})
                break
    else:
        i = state.index
        delta_t = delta_s
        reach = alpha_s + beta_t - beta_s
        theta_i = thetas.value(i, t)
        next_mode, next_index = DiffMode.FOLLOW, i

        if reach > theta_i:
            case = "1"
            epsilon = _epsilon(i + 1, reach - theta_i)
            # theta^i may already sit below alpha_s
            alpha_t = max(alpha_s, theta_i + epsilon)
            events.append({"type": "overtake", "index": i, "epsilon": str(epsilon)})
            next_mode, next_index = DiffMode.WAIT, None
        else:
            gap = delta_s - (alpha_s - beta_s)
            chosen = None
            for j in range(len(thetas)):
                distance = thetas.value(j, s) - alpha_s
                if distance >= 0 and distance < gap.shift(j + 2):
                    chosen = (j, distance)
                    break
            if chosen is not None:
                case = "2"
                j, distance = chosen
                epsilon = _epsilon(j + 1, gap.shift(j + 2) - distance)
                alpha_t = max(thetas.value(j, s) + epsilon, reach)
                events.append({"type": "overtake", "index": j, "epsilon": str(epsilon)})
                if j == i:
                    next_mode, next_index = DiffMode.WAIT, None
            else:
                case = "3"
                alpha_t = reach

    state.stage = t
    state.alpha = alpha_t
    state.delta = delta_t
    state.mode = next_mode
    state.index = next_index
    record = TraceRecord(
        t, CONSTRUCTION, case,
        {"mode": mode_here, "next": state.label},
        _values(state, beta, thetas, t),
        events,
    )
    return state, record


def run_diff(beta, thetas, gamma_bootstrap, stages):
    if stages < 1:
        raise ValueError(f"run_diff needs at least one stage, got {stages}")
    if not isinstance(thetas, ThetaFamily):
        thetas = ThetaFamily(list(thetas))
    state = diff_init(gamma_bootstrap, beta)
    trace = Trace(header={
        "construction": CONSTRUCTION,
        "stages": stages,
        "thetas": len(thetas),
        "bootstrap_horizon": gamma_bootstrap.horizon,
    })
    trace.append(init_record(state, beta, thetas))

    follow_stages = 0
    with StageTimer(f"Wait/follow construction ({stages} stages, {len(thetas)} theta stream(s))"):
        for _ in range(stages):
            state, record = diff_step(state, beta, thetas)
            if record.state["mode"] != DiffMode.WAIT.value:
                follow_stages += 1
            for event in record.events_of("overtake"):
                update_terminal_log(f"alpha overtook theta^{event['index']} at stage {record.stage}", "INFO")
            trace.append(record)

    update_terminal_log(
        f"diff: {follow_stages} follow stage(s) of {stages}; ends in {state.label}", "INFO"
    )
    trace.final_state = state
    return trace


def verify_diff_claims(trace):
    report = VerificationReport(CONSTRUCTION)
    records = trace.records

    delta_above = Verdict(True)
    monotone = Verdict(True)
    budget = Verdict(True)
    half = Verdict(True)
    domination = Verdict(True)
    sandwich = Verdict(True)
    factor = Verdict(True)
    permanence = Verdict(True)

    def gap(record):
        return record.values["delta"] - (record.values["alpha"] - record.values["beta"])

    overtaken = {}
    epoch_index = None
    epoch_gain = None
    epoch_gap = None

    for position, record in enumerate(records):
        stage = record.stage
        alpha, beta, delta = record.values["alpha"], record.values["beta"], record.values["delta"]
        previous = records[position - 1] if position else None

        if delta_above and not delta > alpha - beta:
            delta_above = Verdict(False, stage, f"delta {delta} <= alpha - beta = {alpha - beta}")

        if previous is not None and monotone:
            if alpha < previous.values["alpha"]:
                monotone = Verdict(False, stage, "alpha decreases")
            elif delta > previous.values["delta"]:
                monotone = Verdict(False, stage, "delta increases")

        mode = record.state.get("mode", "")
        if mode == DiffMode.WAIT.value and stage >= 1 and sandwich:
            if not delta <= alpha - beta + Dyadic.pow2(stage - 1):
                sandwich = Verdict(False, stage, f"delta {delta} above alpha - beta + 2^(1-{stage})")

        if mode.startswith("follow"):
            index = int(mode[len("follow("):-1])
            if epoch_index != index or epoch_gain is None:
                epoch_index = index
                epoch_gain = ZERO
                epoch_gap = gap(previous) if previous is not None else gap(record)
            if previous is not None:
                epoch_gain += alpha - previous.values["alpha"]
            if budget and epoch_gain > 2 * Dyadic.pow2(index):
                budget = Verdict(False, stage, f"follow({index}) epoch raised alpha by {epoch_gain} > 2 * 2^-{index}")
            if half and gap(record) < epoch_gap.half():
                half = Verdict(False, stage, f"delta - (alpha - beta) = {gap(record)} fell below half of {epoch_gap}")
            if domination and record.case in ("2", "3") and previous is not None:
                if alpha - previous.values["alpha"] < beta - previous.values["beta"]:
                    domination = Verdict(False, stage, "alpha grew less than beta during follow")
            if factor and record.case == "2" and previous is not None:
                j = record.events_of("overtake")[0]["index"]
                before = gap(previous)
                if gap(record) < before - before.shift(j + 2):
                    factor = Verdict(False, stage, f"case-2 update shrank the gap below (1 - 2^-{j + 2}) * {before}")
        else:
            epoch_index = None
            epoch_gain = None

        if record.state.get("next") == DiffMode.WAIT.value:
            epoch_index = None
            epoch_gain = None

        for event in record.events_of("overtake"):
            overtaken.setdefault(event["index"], stage)
        if permanence:
            for j, since in overtaken.items():
                name = f"theta_{j}"
                if since <= stage and name in record.values and not record.values[name] < alpha:
                    permanence = Verdict(False, stage, f"theta^{j} = {record.values[name]} is back above alpha")
                    break

    report.record("delta_above_difference", delta_above)
    report.record("monotone_alpha_delta", monotone)
    report.record("epoch_budget", budget)
    report.record("half_bound", half)
    report.record("follow_increment_domination", domination)
    report.record("case2_factor", factor)
    report.record("wait_sandwich", sandwich)
    report.record("overtake_permanence", permanence)
    report.log_summary()
    return report
