import random

import pytest

from dyadic import Dyadic, ZERO
from machines import MachineTape, is_prefix_free
from omega_diff import (
    OmegaDiffError,
    combine_w,
    h_from_spec,
    ledger_check,
    replacement_programs,
    run_omega_diff,
    transform_v,
    verify_combination,
    verify_omega_diff,
    verify_omega_diff_trace,
)


def random_tape(rng, name, events, max_program=8, max_output=3):
    tape = MachineTape(name)
    for stage in range(events):
        program = "".join(rng.choice("01") for _ in range(rng.randint(1, max_program)))
        output = "".join(rng.choice("01") for _ in range(rng.randint(0, max_output)))
        if not tape.conflicts(program):
            tape.add(stage, program, output)
    return tape


# 1. h specifications
def test_h_formulas():
    rank = h_from_spec("n+2")
    assert [rank(""), rank("0"), rank("1"), rank("00")] == [2, 3, 4, 5]
    length = h_from_spec("len + 3")
    assert length("0101") == 7

def test_h_table_and_path(tmp_path):
    table = h_from_spec({"": 2, "1": 4})
    assert table("1") == 4
    with pytest.raises(OmegaDiffError):
        table("0")
    path = tmp_path / "h.json"
    path.write_text('{"": 3, "0": 5, }', encoding="utf-8")
    assert h_from_spec(str(path))("0") == 5

def test_h_spec_not_understood():
    with pytest.raises(OmegaDiffError):
        h_from_spec("2^n")

def test_nonpositive_h_is_rejected(u_tape, q_tape):
    with pytest.raises(OmegaDiffError):
        transform_v(u_tape, {"": 0, "1": 4, "0": 3}, q_tape)
    with pytest.raises(OmegaDiffError):
        transform_v(u_tape, lambda tau: "3", q_tape)


# 2. Replacement families
def test_replacement_family_for_short_description():
    assert replacement_programs("0", 4) == ["00", "0100", "0101", "0110"]
    assert replacement_programs("1", 3) == ["10", "110"]

def test_staircase_fallback_keeps_the_measure():
    programs = replacement_programs("0", 6, max_bits=2)
    assert programs == ["00", "010", "0110", "01110", "011110"]
    total = sum((Dyadic.pow2(len(p)) for p in programs), ZERO)
    assert total == Dyadic.pow2(1) - Dyadic.pow2(6)


# 3. The transform on a fixed U and Q
def test_ledger_follows_each_stage(u_tape, q_tape):
    v, ledger, trace = run_omega_diff(u_tape, "n+2", q_tape)
    assert (ledger.c, ledger.sigma0, ledger.tau0) == (2, "10", "")
    assert ledger.at(0).expected_difference == Dyadic(1, 4)
    assert ledger.at(1).expected_difference == Dyadic(1, 3)
    assert ledger.at(1).withheld == Dyadic(1, 4)
    assert ledger.at(3).expected_difference == Dyadic(3, 5)
    for stage in range(4):
        assert u_tape.omega_at(stage) - v.omega_at(stage) == ledger.at(stage).expected_difference
    assert list(ledger.a_set) == ["1"]
    rules = {event["program"]: event["rule"] for _, event in trace.events("v")}
    assert rules["100"] == "first"
    assert rules["1010"] == "q"
    assert rules["10110"] == "q"
    assert rules["110"] == "copy"
    assert rules["11100"] == "copy"
    assert [p for p, rule in rules.items() if rule == "replace"] == ["00", "0100", "0101", "0110"]

def test_complexity_within_one(u_tape, q_tape):
    v, ledger = transform_v(u_tape, "n+2", q_tape)
    for tau in ("", "0", "1"):
        assert v.complexity_at(tau, 3) <= u_tape.complexity_at(tau, 3) + 1
    assert ledger_check(u_tape, v, ledger, 3).holds

def test_q_before_first_description_is_held_back():
    u = MachineTape("U")
    u.add(2, "1", "0")
    q = MachineTape("Q")
    q.add(0, "0", "")
    v, ledger, trace = run_omega_diff(u, "n+2", q)
    assert trace.records[0].state["pending"] == 1
    assert v.omega_at(1) == ZERO
    assert [event.program for event in v] == ["10", "110"]
    assert ledger.expected_difference() == Dyadic(1, 3)
    report = verify_omega_diff(u, v, ledger, q)
    assert report.passed, report.summary()

def test_empty_u_leaves_v_empty(q_tape):
    v, ledger = transform_v(MachineTape("U"), "n+2", q_tape)
    assert len(v) == 0
    assert ledger.c is None
    assert ledger.expected_difference() == ZERO
    assert len(ledger.pending) == 2

def test_rejected_input_events_are_refused(u_tape):
    bad = MachineTape("Q")
    bad.add(0, "0", "")
    bad.add(1, "01", "")
    with pytest.raises(OmegaDiffError):
        transform_v(u_tape, "n+2", bad)

def test_removing_a_replacement_breaks_the_identity(u_tape, q_tape):
    v, ledger = transform_v(u_tape, "n+2", q_tape)
    broken = MachineTape("V'")
    for event in v:
        if event.program != "0110":
            broken.accept(event)
    verdict = ledger_check(u_tape, broken, ledger, 3)
    assert not verdict.holds
    assert "off by 1*2^-4" in verdict.detail


# 4. W
def test_combined_machine_splits_on_first_bit(u_tape, q_tape):
    v, _ = transform_v(u_tape, "n+2", q_tape)
    w = combine_w(u_tape, v)
    assert w.omega() == (u_tape.omega() + v.omega()).half()
    assert w.complexity_at("1", 3) == u_tape.complexity_at("1", 3) + 1
    assert {event.program for event in w if event.program.startswith("0")} == {"0" + p for p in u_tape.domain}
    assert {event.program for event in w if event.program.startswith("1")} == {"1" + p for p in v.domain}
    assert verify_combination(u_tape, v, w).holds

def test_combination_with_empty_v(u_tape):
    w = combine_w(u_tape, MachineTape("V"))
    assert w.omega() == u_tape.omega().half()


# 5. Randomized identities
def test_randomized_ledger_and_mean_identities():
    rng = random.Random(9)
    for _ in range(100):
        u = random_tape(rng, "U", rng.randint(1, 200))
        q = random_tape(rng, "Q", 12, max_program=6)
        v, ledger = transform_v(u, "len+2", q)
        report = verify_omega_diff(u, v, ledger, q)
        assert report.passed, report.summary()
        assert verify_combination(u, v, combine_w(u, v)).holds

def test_transformed_and_combined_domains_are_prefix_free():
    rng = random.Random(10)
    for _ in range(1000):
        u = random_tape(rng, "U", 20)
        q = random_tape(rng, "Q", 6, max_program=5)
        v, _ = transform_v(u, rng.choice(["n+2", "len+2"]), q)
        w = combine_w(u, v)
        assert is_prefix_free(v.domain)
        assert is_prefix_free(w.domain)


# 6. Traces
def test_trace_verifier_accepts_and_catches_edits(u_tape, q_tape):
    _, _, trace = run_omega_diff(u_tape, "n+2", q_tape)
    assert verify_omega_diff_trace(trace).passed
    trace.records[1].values["expected"] = Dyadic(1, 2)
    report = verify_omega_diff_trace(trace)
    assert not report.get("recorded_values").passed
