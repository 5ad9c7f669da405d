import pytest

from cli import EXIT_CONTRACT, EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from diag_machine import run_diag
from dyadic import Dyadic
from opponents import CopyingOpponent
from parser import load_machine_tape, write_machine_tape
from streams import default_beta
from traces import read_trace, write_trace


@pytest.fixture
def tapes(tmp_path, u_tape, q_tape):
    u_path, q_path = str(tmp_path / "u.jsonl"), str(tmp_path / "q.jsonl")
    write_machine_tape(u_path, u_tape)
    write_machine_tape(q_path, q_tape)
    return u_path, q_path


# 1. Usage errors
def test_unknown_construction_is_a_usage_error(tmp_path):
    assert main(["simulate", "diag-everything", "--out", str(tmp_path / "t.jsonl")]) == EXIT_USAGE

def test_unknown_suite_is_a_usage_error(tmp_path):
    assert main(["verify", "--trace", str(tmp_path / "t.jsonl"), "--suite", "some"]) == EXIT_USAGE

def test_missing_construction_input(tmp_path):
    assert main(["simulate", "diag-diff", "--out", str(tmp_path / "t.jsonl")]) == EXIT_USAGE

def test_unparseable_trace(write_lines):
    path = write_lines("t.jsonl", ['{"kind": "header", "construction": "diag"', "garbage"])
    assert main(["verify", "--trace", path]) == EXIT_USAGE

def test_unknown_trace_construction(write_lines):
    path = write_lines("t.jsonl", ['{"kind": "header", "construction": "sorting"}'])
    assert main(["verify", "--trace", path]) == EXIT_USAGE


# 2. Simulate and verify
def test_diag_machine_round_trip(tmp_path, capsys):
    out = str(tmp_path / "diag.jsonl")
    assert main(["simulate", "diag-machine", "--stages", "40", "--opponent", "copying", "--out", out]) == EXIT_OK
    report = str(tmp_path / "report.csv")
    assert main(["verify", "--trace", out, "--suite", "all", "--report", report]) == EXIT_OK
    printed = capsys.readouterr().out
    assert "PASS alpha_monotone" in printed
    assert "PASS monotone.alpha" in printed
    assert open(report, encoding="utf-8").readline().startswith("# Generated")

def test_corrupted_trace_fails_verification(tmp_path, capsys):
    trace = run_diag(CopyingOpponent(), default_beta(31), 30)
    trace.records[12].values["alpha"] = trace.records[12].values["beta"] + Dyadic(1, 30)
    path = str(tmp_path / "bad.jsonl")
    write_trace(path, trace)
    assert main(["verify", "--trace", path]) == EXIT_FAILED
    assert "FAIL alpha_below_beta (stage 12)" in capsys.readouterr().out

def test_layerwise_round_trip(tmp_path, write_lines):
    index = write_lines("idx.jsonl", ['{"stage": 0, "index": 0}', '{"stage": 30, "index": 1}'])
    out = str(tmp_path / "layer.jsonl")
    code = main([
        "simulate", "diag-machine-layerwise", "--stages", "60", "--index", index,
        "--xi", "0,1*2^-1,3*2^-2", "--component", "copying", "--component", "stalling", "--out", out,
    ])
    assert code == EXIT_OK
    assert read_trace(out).construction == "layerwise"
    assert main(["verify", "--trace", out, "--suite", "all"]) == EXIT_OK

def test_diff_round_trip(tmp_path):
    thetas = tmp_path / "thetas"
    thetas.mkdir()
    (thetas / "0.jsonl").write_text('{"stage": 0, "value": 1}\n{"stage": 5, "value": "5*2^-4"}\n', encoding="utf-8")
    (thetas / "1.jsonl").write_text('{"stage": 0, "value": "7*2^-3"}\n', encoding="utf-8")
    out = str(tmp_path / "diff.jsonl")
    assert main(["simulate", "diag-diff", "--stages", "50", "--theta-dir", str(thetas), "--out", out]) == EXIT_OK
    assert main(["verify", "--trace", out, "--suite", "all"]) == EXIT_OK

def test_semimeasure_round_trip(tmp_path, write_lines):
    alpha = write_lines("alpha.jsonl", [
        '{"stage": 0, "value": 0}', '{"stage": 3, "value": "1*2^-3"}',
        '{"stage": 4, "value": "3*2^-4"}', '{"stage": 5, "value": "5*2^-4"}',
    ])
    mu = write_lines("mu.jsonl", ['{"stage": 1, "index": 3, "amount": "1*2^-2"}'])
    out = str(tmp_path / "m.jsonl")
    assert main(["simulate", "semimeasure", "--stages", "6", "--kmax", "3",
                 "--alpha", alpha, "--mu", mu, "--out", out]) == EXIT_OK
    assert main(["verify", "--trace", out, "--suite", "all"]) == EXIT_OK

def test_omega_diff_round_trip(tmp_path, tapes):
    u_path, q_path = tapes
    out = str(tmp_path / "od.jsonl")
    ledger = str(tmp_path / "ledger.jsonl")
    assert main(["simulate", "omega-diff", "--u", u_path, "--q", q_path, "--out", out, "--ledger", ledger]) == EXIT_OK
    assert main(["verify", "--trace", out, "--suite", "all"]) == EXIT_OK
    assert '"expected":"3*2^-5"' in open(ledger, encoding="utf-8").read().splitlines()[-1]


# 3. Machine tools
def test_kc_rejects_alpha_above_one(write_lines, tmp_path):
    alpha = write_lines("alpha.jsonl", ['{"stage": 0, "value": 0}', '{"stage": 2, "value": "3*2^-1"}'])
    assert main(["kc", "--alpha", alpha, "--stages", "3", "--out", str(tmp_path / "m.jsonl")]) == EXIT_CONTRACT

def test_kc_machine_tracks_alpha(write_lines, tmp_path):
    alpha = write_lines("alpha.jsonl", [
        '{"stage": 0, "value": 0}', '{"stage": 3, "value": "1*2^-1"}', '{"stage": 7, "value": "3*2^-2"}',
    ])
    out = str(tmp_path / "m.jsonl")
    assert main(["kc", "--alpha", alpha, "--stages", "10", "--out", out]) == EXIT_OK
    tape = load_machine_tape(out)
    assert tape.omega_at(6) == Dyadic(1, 1)
    assert tape.omega() == Dyadic(3, 2)

def test_transform_and_combine(tmp_path, tapes):
    u_path, q_path = tapes
    v_path = str(tmp_path / "v.jsonl")
    assert main(["transform", "omega-diff", "--u", u_path, "--q", q_path, "--out", v_path]) == EXIT_OK
    assert load_machine_tape(v_path).omega() == Dyadic(13, 4)
    w_path = str(tmp_path / "w.jsonl")
    assert main(["combine-w", "--u", u_path, "--v", v_path, "--out", w_path]) == EXIT_OK
    assert load_machine_tape(w_path).omega() == Dyadic(55, 6)

def test_pad_footnote_keeps_measure(tmp_path, tapes, u_tape):
    out = str(tmp_path / "padded.jsonl")
    assert main(["pad-footnote", "--u", tapes[0], "--out", out]) == EXIT_OK
    padded = load_machine_tape(out)
    assert padded.omega() == u_tape.omega()
    assert all(len(program) % 2 == 0 for program in padded.domain)

def test_adjoin_weights_components(tmp_path, tapes, u_tape, q_tape):
    out = str(tmp_path / "adj.jsonl")
    assert main(["adjoin", "--component", tapes[0], "--component", tapes[1], "--out", out]) == EXIT_OK
    universal = load_machine_tape(out)
    assert universal.omega() == u_tape.omega().half() + q_tape.omega().shift(2)


# 4. Logging
def test_verbose_turns_on_echo(mocker, tmp_path):
    echo = mocker.patch('cli.set_log_echo')
    log = mocker.patch('cli.update_terminal_log')
    out = str(tmp_path / "m.jsonl")
    assert main(["--verbose", "kc", "--alpha", str(tmp_path / "missing.jsonl"), "--out", out]) == EXIT_USAGE
    echo.assert_called_once_with(True)
    assert log.call_args[0][1] == "ERROR"
    assert "Parse error" in log.call_args[0][0]
