"""
Batch front end: run the constructions, write JSON-lines traces, verify them
and convert between machine formats.

Exit codes: 0 pass, 1 verification failure, 2 usage or parse error,
3 input-contract violation.
"""

import argparse
import json
import sys

from diag_diff import CONSTRUCTION as DIFF, run_diff, verify_diff_claims
from diag_machine import CONSTRUCTION as DIAG, LAYERWISE, run_diag, run_layerwise_diag, verify_diag_claims, verify_layerwise
from kraft_chaitin import real_to_machine
from machines import MachineTape, adjoin_universal, footnote_pad
from omega_diff import CONSTRUCTION as OMEGA_DIFF, combine_w, run_omega_diff, verify_omega_diff_trace
from opponents import get_opponent_instance
from parser import (
    load_index_schedule,
    load_ladder,
    load_machine_tape,
    load_semimeasure_tape,
    load_stream,
    load_theta_family,
    write_machine_tape,
)
from semimeasures import (
    CONSTRUCTION as SEMIMEASURE,
    mixture_universal,
    semimeasure_trace,
    uniform_semimeasure_with_sum,
    verify_semimeasure_trace,
)
from streams import Direction, check_stream_values, constant_stream, default_beta
from traces import VerificationReport, read_trace, write_trace
from utils import (
    DEFAULT_KMAX,
    DEFAULT_STAGES,
    InputContractError,
    TraceFormatError,
    export_report,
    set_log_echo,
    write_jsonl,
)

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_CONTRACT = 3

CONSTRUCTIONS = ("diag-machine", "diag-machine-layerwise", "diag-diff", "semimeasure", "omega-diff")
SUITES = ("claims", "monotone", "all")

CLAIM_VERIFIERS = {
    DIAG: verify_diag_claims,
    LAYERWISE: verify_layerwise,
    DIFF: verify_diff_claims,
    SEMIMEASURE: verify_semimeasure_trace,
    OMEGA_DIFF: verify_omega_diff_trace,
}

# series whose direction is fixed for the whole trace
MONOTONE_SERIES = {
    DIAG: {"alpha": Direction.NONDECREASING, "beta": Direction.NONDECREASING, "gamma": Direction.NONDECREASING},
    LAYERWISE: {"alpha": Direction.NONDECREASING, "base_beta": Direction.NONDECREASING},
    DIFF: {"alpha": Direction.NONDECREASING, "beta": Direction.NONDECREASING, "delta": Direction.NONINCREASING},
    SEMIMEASURE: {"alpha": Direction.NONDECREASING, "m_total": Direction.NONDECREASING},
    OMEGA_DIFF: {
        "omega_u": Direction.NONDECREASING,
        "omega_v": Direction.NONDECREASING,
        "gamma": Direction.NONDECREASING,
        "withheld": Direction.NONDECREASING,
    },
}


def _beta(args, stages):
    if args.beta:
        return load_stream(args.beta, direction=Direction.NONDECREASING)
    return default_beta(stages + 1)


def _simulate_diag(args):
    opponent = get_opponent_instance(args.opponent or "copying")
    return run_diag(opponent, _beta(args, args.stages), args.stages)


def _simulate_layerwise(args):
    if not args.index or not args.xi or not args.component:
        raise argparse.ArgumentTypeError("diag-machine-layerwise needs --index, --xi and at least one --component")
    schedule = load_index_schedule(args.index, horizon=args.stages)
    specs = list(args.component)

    def opponent_for(index):
        if index < 0 or index >= len(specs):
            raise InputContractError(f"opponent index {index} has no --component")
        return get_opponent_instance(specs[index], name=f"M{index}")

    return run_layerwise_diag(schedule, opponent_for, load_ladder(args.xi), args.stages, _beta(args, args.stages))


def _simulate_diff(args):
    if not args.theta_dir:
        raise argparse.ArgumentTypeError("diag-diff needs --theta-dir")
    thetas = load_theta_family(args.theta_dir)
    bootstrap = load_stream(args.gamma) if args.gamma else constant_stream(0, 0)
    return run_diff(_beta(args, args.stages), thetas, bootstrap, args.stages)


def _simulate_semimeasure(args):
    if not args.alpha or not args.mu:
        raise argparse.ArgumentTypeError("semimeasure needs --alpha and at least one --mu")
    alpha = load_stream(args.alpha, direction=Direction.NONDECREASING)
    components = [load_semimeasure_tape(path, name=f"mu_{e}") for e, path in enumerate(args.mu)]
    mu = components[0] if len(components) == 1 else mixture_universal(components, name="mu")
    run = uniform_semimeasure_with_sum(alpha, mu, kmax=args.kmax, horizon=args.stages)
    return semimeasure_trace(run, alpha)


def _simulate_omega_diff(args):
    if not args.u:
        raise argparse.ArgumentTypeError("omega-diff needs --u")
    u = load_machine_tape(args.u, name="U")
    q = load_machine_tape(args.q, name="Q") if args.q else MachineTape("Q")
    _, ledger, trace = run_omega_diff(u, args.h, q, horizon=args.stages)
    if args.ledger:
        write_jsonl(args.ledger, ledger.to_records())
    return trace


SIMULATORS = {
    "diag-machine": _simulate_diag,
    "diag-machine-layerwise": _simulate_layerwise,
    "diag-diff": _simulate_diff,
    "semimeasure": _simulate_semimeasure,
    "omega-diff": _simulate_omega_diff,
}


def cmd_simulate(args):
    trace = SIMULATORS[args.construction](args)
    write_trace(args.out, trace)
    return EXIT_OK


def monotone_report(trace):
    report = VerificationReport(trace.construction)
    for name, direction in MONOTONE_SERIES.get(trace.construction, {}).items():
        series = trace.staged_series(name)
        if not series:
            continue
        verdict = check_stream_values([value for _, value in series], direction, name)
        stage = series[verdict.stage][0] if verdict.stage is not None else None
        report.record(f"monotone.{name}", verdict.holds, stage, verdict.detail)
    if trace.construction == DIFF:
        theta_names = sorted({name for record in trace.records for name in record.values if name.startswith("theta_")})
        for name in theta_names:
            series = trace.staged_series(name)
            verdict = check_stream_values([value for _, value in series], Direction.NONINCREASING, name)
            stage = series[verdict.stage][0] if verdict.stage is not None else None
            report.record(f"monotone.{name}", verdict.holds, stage, verdict.detail)
    return report


def cmd_verify(args):
    trace = read_trace(args.trace)
    construction = trace.construction
    if construction not in CLAIM_VERIFIERS:
        raise TraceFormatError(f"{args.trace}: unknown construction {construction!r} in header")

    report = VerificationReport(construction)
    if args.suite in ("claims", "all"):
        report.extend(CLAIM_VERIFIERS[construction](trace))
    if args.suite in ("monotone", "all"):
        report.extend(monotone_report(trace))

    for check in report.checks:
        mark = "PASS" if check.passed else "FAIL"
        where = f" (stage {check.first_stage})" if check.first_stage is not None else ""
        detail = f": {check.detail}" if not check.passed and check.detail else ""
        print(f"{mark} {check.name}{where}{detail}")
    print(report.summary())

    if args.report:
        export_report(report, args.report)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_kc(args):
    alpha = load_stream(args.alpha, direction=Direction.NONDECREASING)
    tape = real_to_machine(alpha, args.stages)
    write_machine_tape(args.out, tape)
    update_terminal_log(f"Kraft-Chaitin machine with Omega = {tape.omega()} written to {args.out}", "SUCCESS")
    return EXIT_OK


def cmd_transform(args):
    u = load_machine_tape(args.u, name="U")
    q = load_machine_tape(args.q, name="Q") if args.q else MachineTape("Q")
    v, ledger, _ = run_omega_diff(u, args.h, q, horizon=args.stages)
    write_machine_tape(args.out, v)
    if args.ledger:
        write_jsonl(args.ledger, ledger.to_records())
    return EXIT_OK


def cmd_combine_w(args):
    w = combine_w(load_machine_tape(args.u, name="U"), load_machine_tape(args.v, name="V"))
    write_machine_tape(args.out, w)
    return EXIT_OK


def cmd_pad_footnote(args):
    write_machine_tape(args.out, footnote_pad(load_machine_tape(args.u, name="U")))
    return EXIT_OK


def cmd_adjoin(args):
    components = [load_machine_tape(path, name=f"M{e}") for e, path in enumerate(args.component)]
    write_machine_tape(args.out, adjoin_universal(components))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="omega-workbench", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--verbose", action="store_true", help="echo the terminal log to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a construction and write its trace")
    simulate.add_argument("construction", choices=CONSTRUCTIONS)
    simulate.add_argument("--stages", type=int, default=DEFAULT_STAGES)
    simulate.add_argument("--out", required=True)
    simulate.add_argument("--opponent", help="stalling, copying, overshoot:<stage>, random:<seed> or a tape file")
    simulate.add_argument("--beta", help="nondecreasing stream file (default: 13/16 - 2^-(s+2))")
    simulate.add_argument("--theta-dir", dest="theta_dir")
    simulate.add_argument("--gamma", help="bootstrap stream whose final value starts alpha")
    simulate.add_argument("--xi", help="ladder stream file or comma-separated dyadics")
    simulate.add_argument("--index", help="opponent index schedule file")
    simulate.add_argument("--component", action="append", default=[])
    simulate.add_argument("--alpha")
    simulate.add_argument("--mu", action="append", default=[])
    simulate.add_argument("--kmax", type=int, default=DEFAULT_KMAX)
    simulate.add_argument("--u")
    simulate.add_argument("--q")
    simulate.add_argument("--h", default="n+2")
    simulate.add_argument("--ledger")
    simulate.set_defaults(handler=cmd_simulate)

    verify = sub.add_parser("verify", help="check a trace against a claim suite")
    verify.add_argument("--trace", required=True)
    verify.add_argument("--suite", choices=SUITES, default="claims")
    verify.add_argument("--report", help="export the report as .csv or .xlsx")
    verify.set_defaults(handler=cmd_verify)

    kc = sub.add_parser("kc", help="machine with Omega_M[s] = alpha_s")
    kc.add_argument("--alpha", required=True)
    kc.add_argument("--stages", type=int, default=DEFAULT_STAGES)
    kc.add_argument("--out", required=True)
    kc.set_defaults(handler=cmd_kc)

    transform = sub.add_parser("transform", help="machine transformations")
    transform.add_argument("kind", choices=("omega-diff",))
    transform.add_argument("--u", required=True)
    transform.add_argument("--q")
    transform.add_argument("--h", default="n+2")
    transform.add_argument("--stages", type=int)
    transform.add_argument("--out", required=True)
    transform.add_argument("--ledger")
    transform.set_defaults(handler=cmd_transform)

    combine = sub.add_parser("combine-w", help="W(0p) = U(p), W(1p) = V(p)")
    combine.add_argument("--u", required=True)
    combine.add_argument("--v", required=True)
    combine.add_argument("--out", required=True)
    combine.set_defaults(handler=cmd_combine_w)

    pad = sub.add_parser("pad-footnote", help="even-length padding of a machine")
    pad.add_argument("--u", required=True)
    pad.add_argument("--out", required=True)
    pad.set_defaults(handler=cmd_pad_footnote)

    adjoin = sub.add_parser("adjoin", help="universal machine by adjunction")
    adjoin.add_argument("--component", action="append", required=True)
    adjoin.add_argument("--out", required=True)
    adjoin.set_defaults(handler=cmd_adjoin)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    if args.verbose:
        set_log_echo(True)

    try:
        return args.handler(args)
    except argparse.ArgumentTypeError as e:
        parser.print_usage(sys.stderr)
        update_terminal_log(str(e), "ERROR")
        return EXIT_USAGE
    except (TraceFormatError, json.JSONDecodeError) as e:
        update_terminal_log(f"Parse error: {e}", "ERROR")
        return EXIT_USAGE
    except InputContractError as e:
        update_terminal_log(f"Input contract violation: {e}", "ERROR")
        return EXIT_CONTRACT
    except ValueError as e:
        update_terminal_log(f"Bad argument: {e}", "ERROR")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
