import random

import pytest

from dyadic import Dyadic, ONE, ZERO
from semimeasures import (
    MLTestTape,
    SemiMeasureError,
    SemiMeasureTape,
    mixture_universal,
    semimeasure_trace,
    uniform_semimeasure_with_sum,
    verify_domination,
    verify_semimeasure_run,
    verify_semimeasure_trace,
)
from streams import LeftCEStream, constant_stream, scripted_stream


def tape_of(increments, name="mu"):
    tape = SemiMeasureTape(name)
    for stage, index, amount in increments:
        tape.add(stage, index, amount)
    return tape


def random_fixture(rng, horizon):
    alpha_values = [ZERO]
    for _ in range(horizon):
        room = ONE - alpha_values[-1]
        step = Dyadic(rng.randint(0, 1), rng.randint(3, 12))
        alpha_values.append(alpha_values[-1] + (step if step <= room else ZERO))
    mu = SemiMeasureTape("mu")
    total = ZERO
    for stage in range(horizon + 1):
        if rng.random() < 0.1:
            amount = Dyadic.pow2(rng.randint(3, 8))
            if total + amount <= ONE:
                mu.add(stage, rng.randint(0, 5), amount)
                total += amount
    return LeftCEStream(alpha_values), mu


# 1. Tapes
def test_semimeasure_tape_mass_and_total():
    mu = tape_of([(0, 2, "1*2^-2"), (3, 2, "1*2^-3"), (3, 0, "1*2^-1")])
    assert mu.mass(2, 2) == Dyadic(1, 2)
    assert mu.mass(2, 3) == Dyadic(3, 3)
    assert mu.total(3) == Dyadic(7, 3)
    assert mu.indices(0) == [2]
    assert mu.indices() == [0, 2]

def test_semimeasure_tape_rejects_bad_increments():
    mu = SemiMeasureTape()
    with pytest.raises(SemiMeasureError):
        mu.add(0, 0, 0)
    mu.add(0, 0, 1)
    with pytest.raises(SemiMeasureError):
        mu.add(1, 1, "1*2^-5")

def test_ml_test_tape_measure_and_contains():
    test = MLTestTape()
    test.add(1, 2, Dyadic(1, 3), Dyadic(1, 2))
    test.add(1, 5, Dyadic(3, 2), Dyadic(7, 3))
    assert test.measure(1) == Dyadic(1, 2)
    assert test.measure(1, 3) == Dyadic(1, 3)
    assert test.measure(1, 5) == Dyadic(1, 2)
    assert test.contains(1, Dyadic(13, 4))
    assert test.contains(1, Dyadic(3, 4))
    assert not test.contains(1, Dyadic(7, 4))
    assert not test.contains(1, Dyadic(1, 2))
    assert test.measure(2) == ZERO


# 2. Mixtures and domination
def test_mixture_single_component():
    m = mixture_universal([tape_of([(0, 0, "1*2^-1")])])
    assert m.mass(0, 0) == Dyadic(1, 2)

def test_mixture_empty_and_two_full_components():
    assert mixture_universal([]).total(10) == ZERO
    full = [tape_of([(0, 0, 1)]), tape_of([(1, 4, 1)])]
    assert mixture_universal(full).total(1) == Dyadic(3, 2)

def test_verify_domination_reports_both_forms():
    mu = tape_of([(0, 0, "1*2^-1"), (1, 3, "1*2^-2")])
    verdict = verify_domination(mixture_universal([mu]), mu, 1, 1)
    assert verdict.holds_non_strict
    assert not verdict.holds

def test_verify_domination_vacuous_and_violated():
    empty = SemiMeasureTape()
    assert verify_domination(empty, empty, 1, 5)
    verdict = verify_domination(empty, tape_of([(0, 0, "1*2^-1")]), 3, 0)
    assert not verdict.holds_non_strict


# 3. The uniform construction
def test_single_level_hand_simulation():
    alpha = scripted_stream(
        [(0, 0), (3, "1*2^-3"), (4, "3*2^-4"), (5, "5*2^-4")], "nondecreasing", horizon=6
    )
    mu = tape_of([(1, 3, "1*2^-2")])
    run = uniform_semimeasure_with_sum(alpha, mu, kmax=1)
    m, test = run
    interval = test.intervals(1)[0]
    assert (interval.stage, interval.lo, interval.hi) == (3, Dyadic(1, 3), Dyadic(1, 2))
    assert m.mass(3, 3) == Dyadic(1, 4)
    assert m.mass(3, 4) == Dyadic(3, 5)
    assert m.mass(3, 5) == Dyadic(5, 5)
    assert run.final_step[1] == 1
    assert run.step1_entry[1] == 5
    assert verify_semimeasure_run(run, alpha).passed

def test_quiet_mu_leaves_m_empty():
    alpha = scripted_stream([(0, 0), (2, "1*2^-1")], "nondecreasing", horizon=4)
    m, test = uniform_semimeasure_with_sum(alpha, SemiMeasureTape(), kmax=3)
    assert m.total(4) == ZERO
    assert all(test.measure(k) == ZERO for k in (1, 2, 3))

def test_quiescent_sum_identity():
    alpha = scripted_stream([(0, 0), (1, "1*2^-1")], "nondecreasing", horizon=3)
    mu = tape_of([(0, 0, "1*2^-1")])
    run = uniform_semimeasure_with_sum(alpha, mu, kmax=8)
    assert run.m.total(3) == Dyadic(255, 9)
    report = verify_semimeasure_run(run, alpha)
    assert report.get("sum_identity").passed

def test_nonzero_starting_alpha_is_consumed_in_full():
    alpha = scripted_stream([(0, "1*2^-2"), (2, "1*2^-1")], "nondecreasing", horizon=4)
    run = uniform_semimeasure_with_sum(alpha, tape_of([(1, 0, "1*2^-1")]), kmax=2)
    assert run.consumed[1][:2] == [ZERO, Dyadic(1, 2)]
    assert run.m.mass(0, 1) == Dyadic(3, 4)
    assert run.m.total(4) == Dyadic(3, 3)
    assert [(i.lo, i.hi) for i in run.test.intervals(2)] == [(Dyadic(1, 2), Dyadic(3, 3))]
    report = verify_semimeasure_run(run, alpha)
    assert report.passed, report.summary()

def test_rejects_alpha_above_one():
    alpha = constant_stream(2, 3)
    with pytest.raises(SemiMeasureError):
        uniform_semimeasure_with_sum(alpha, SemiMeasureTape(), kmax=1)

def check_randomized_runs(seed, fixtures, horizon):
    rng = random.Random(seed)
    for _ in range(fixtures):
        alpha, mu = random_fixture(rng, horizon)
        run = uniform_semimeasure_with_sum(alpha, mu, kmax=8)
        report = verify_semimeasure_run(run, alpha)
        assert report.passed, report.summary()
        for k in range(1, 9):
            assert run.test.measure(k) <= Dyadic.pow2(k)

def test_randomized_runs_pass_every_check():
    check_randomized_runs(8, 20, 400)

@pytest.mark.slow
def test_randomized_runs_over_ten_thousand_stages():
    check_randomized_runs(9, 50, 10 ** 4)


# 4. Traces
def test_trace_verifier_agrees_with_run():
    alpha = scripted_stream([(0, 0), (1, "1*2^-1")], "nondecreasing", horizon=3)
    run = uniform_semimeasure_with_sum(alpha, tape_of([(0, 0, "1*2^-1")]), kmax=4)
    trace = semimeasure_trace(run, alpha)
    assert len(trace) == 4
    assert trace.records[1].events_of("mass")
    report = verify_semimeasure_trace(trace)
    assert report.passed
    assert report.get("quiescent_sum").passed

def test_trace_verifier_catches_tampering():
    alpha = scripted_stream([(0, 0), (1, "1*2^-1")], "nondecreasing", horizon=3)
    run = uniform_semimeasure_with_sum(alpha, tape_of([(0, 0, "1*2^-1")]), kmax=2)
    trace = semimeasure_trace(run, alpha)
    trace.records[2].values["m_1"] += Dyadic.pow2(10)
    report = verify_semimeasure_trace(trace)
    assert not report.get("per_level_accounting").passed
    assert report.get("per_level_accounting").first_stage == 2
