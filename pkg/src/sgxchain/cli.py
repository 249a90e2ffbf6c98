"""Command-line front end.

Exit codes: 0 accept, 2 reject (or missed detections), 1 operational error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from . import symbolic as sym
from .attacks import honest_run, run_attack, run_campaign
from .corpus import corpus_campaign, scenario_campaign
from .cost import overhead_sweep
from .entropy import make_rng
from .errors import BaselineFailed, SgxChainError
from .protocol import build_request, cloud_handle, establish_session, user_receive
from .runtime import default_registry, execute_plan
from .scenario import Scenario, fig9_plan, load_scenario
from .verifier import compute_user_hash, verification_report

EXIT_ACCEPT = 0
EXIT_ERROR = 1
EXIT_REJECT = 2

BENCH_SIZES = (7, 14, 21, 28, 35)


class UsageError(SgxChainError):
    pass


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        print(text)


def _scenario(args, required: bool = True) -> Optional[Scenario]:
    path = args.scenario_path or args.scenario
    if path is None:
        if required:
            raise UsageError("a scenario file is required (positional or --scenario)")
        return None
    return load_scenario(path)


def _seed(args, sc: Optional[Scenario]):
    if args.seed is not None:
        return args.seed
    return sc.seed if sc is not None else None


def _report_text(report: dict) -> str:
    lines = [f"verdict: {report['verdict']}" + (f" ({report['reason']})" if report["reason"] else "")]
    for key in ("expected_hex", "received_hex", "plan_fingerprint", "attack", "result_hex"):
        if report.get(key) is not None:
            lines.append(f"{key}: {report[key]}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    sc = _scenario(args)
    rng = make_rng(_seed(args, sc))
    functions = default_registry()
    attacks = [] if args.honest else sc.attacks
    if args.attack is not None:
        if not 0 <= args.attack < len(sc.attacks):
            raise UsageError(f"--attack {args.attack} out of range (scenario lists {len(sc.attacks)})")
        attacks = [sc.attacks[args.attack]]
    if len(attacks) > 1:
        raise UsageError("scenario lists several attacks; pick one with --attack or use 'campaign'")

    if args.replay_demo:
        return _replay_demo(args, sc, rng, functions)

    if attacks:
        baseline = honest_run(sc, functions, rng)
        if not baseline.verdict.accepted:
            raise BaselineFailed(f"honest run was rejected: {baseline.verdict}")
        exchange = run_attack(sc, attacks[0], functions, rng)
    else:
        exchange = honest_run(sc, functions, rng)

    report = verification_report(exchange.verdict, sc.plan)
    if attacks:
        report["attack"] = repr(attacks[0])
    if exchange.verdict.accepted:
        report["result_hex"] = exchange.verdict.result.hex()
    if args.save_envelopes:
        _save_envelopes(args.save_envelopes, exchange.request, exchange.response, exchange.nonce)
    _emit(args, report, _report_text(report))
    return EXIT_ACCEPT if exchange.verdict.accepted else EXIT_REJECT


def _save_envelopes(path, request, response, nonce) -> None:
    Path(path).write_text(
        json.dumps(
            {
                "request_hex": request.ciphertext.hex(),
                "response_hex": response.ciphertext.hex(),
                "nonce_hex": nonce.hex(),
            },
            indent=2,
        )
        + "\n"
    )


def _replay_demo(args, sc: Scenario, rng, functions) -> int:
    """Answer a second request with the response to the first one."""
    session = establish_session(rng)
    plans = sc.plans
    first, _ = build_request(session, sc.data, sc.request_id, plans)
    old_response = cloud_handle(session, first, plans, functions)
    second, r_new = build_request(session, sc.data, sc.request_id, plans)
    verdict = user_receive(session, sc.plan, r_new, old_response)
    report = verification_report(verdict, sc.plan)
    report["attack"] = "replay of an earlier response"
    if args.save_envelopes:
        _save_envelopes(args.save_envelopes, second, old_response, r_new)
    _emit(args, report, _report_text(report))
    return EXIT_ACCEPT if verdict.accepted else EXIT_REJECT


def cmd_trace(args) -> int:
    sc = _scenario(args)
    rng = make_rng(_seed(args, sc))
    r = rng.randbytes(16)
    sides = ("user", "cloud") if args.side == "both" else (args.side,)
    payload: dict = {"nonce_hex": r.hex()}
    text = []
    for side in sides:
        if side == "user":
            trace = compute_user_hash(sc.plan, r, symbolic=True).trace
        else:
            trace = execute_plan(sc.plan, sc.data, r, default_registry(), symbolic=True).trace
        listing = sym.referential_listing(sc.plan, side)
        final = sym.render(trace.final_expr)
        payload[side] = {
            "per_node": {nid: expr for nid, expr in listing},
            "overall": final,
            "trace": trace.to_dict(),
        }
        text.append(f"[{side}]")
        text += [f"H_{nid} = {expr}" for nid, expr in listing]
        text.append(f"hash_{side} = {final}")
    _emit(args, payload, "\n".join(text))
    return EXIT_ACCEPT


def cmd_campaign(args) -> int:
    functions = default_registry()
    random_counts = dict(ddrc=args.random_ddrc, tamper=args.random_otm, misroute=args.random_misroute)
    if args.random_plans:
        rng = make_rng(args.seed)
        report = corpus_campaign(rng, functions, **random_counts)
    else:
        sc = _scenario(args)
        rng = make_rng(_seed(args, sc))
        if any(random_counts.values()):
            report = scenario_campaign(sc, rng, functions, **random_counts)
        else:
            report = run_campaign(sc, sc.attacks, functions, rng)
    _emit(args, report.to_dict(), report.to_text())
    return EXIT_ACCEPT if report.detection_rate == 1.0 else EXIT_REJECT


def cmd_bench(args) -> int:
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    functions = default_registry()
    if args.sweep:
        plans = [fig9_plan(n // 7, enclaves=args.enclaves, function=args.function) for n in BENCH_SIZES]
    else:
        sc = _scenario(args, required=False)
        plans = [sc.plan if sc else fig9_plan(1, enclaves=args.enclaves, function=args.function)]
    report = overhead_sweep(plans, functions, args.reps)
    _emit(args, report.to_dict(), report.to_text())
    return EXIT_ACCEPT


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario_path", nargs="?", help="scenario JSON file")
    common.add_argument("--scenario", help="scenario JSON file (alternative to the positional)")
    common.add_argument("--seed", type=int, help="seed for nonces, keys and generated attacks")
    common.add_argument("--format", choices=("text", "json"), default="text")

    parser = argparse.ArgumentParser(prog="sgxchain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run the four protocol phases and verify")
    run.add_argument("--attack", type=int, help="index of the scenario attack to inject")
    run.add_argument("--honest", action="store_true", help="ignore attacks listed in the scenario")
    run.add_argument("--save-envelopes", metavar="PATH", help="write request/response hex dumps here")
    run.add_argument("--replay-demo", action="store_true", help="answer a fresh request with an old response")
    run.set_defaults(func=cmd_run)

    trace = sub.add_parser("trace", parents=[common], help="print symbolic hash-chain formulas")
    trace.add_argument("--side", choices=("user", "cloud", "both"), default="both")
    trace.set_defaults(func=cmd_trace)

    camp = sub.add_parser("campaign", parents=[common], help="run an attack campaign")
    camp.add_argument("--random-ddrc", type=int, default=0, metavar="N")
    camp.add_argument("--random-otm", type=int, default=0, metavar="N", help="single-octet tampers")
    camp.add_argument("--random-misroute", type=int, default=0, metavar="N")
    camp.add_argument("--random-plans", action="store_true", help="fresh random plan per attack")
    camp.set_defaults(func=cmd_campaign)

    bench = sub.add_parser("bench", parents=[common], help="measure hash-chain bookkeeping overhead")
    bench.add_argument("--reps", type=int, default=10)
    bench.add_argument("--sweep", action="store_true", help="scaled hybrid plans with 7..35 nodes")
    bench.add_argument("--function", default="busyloop_1M", help="business function for generated plans")
    bench.add_argument("--enclaves", type=int, default=7)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SgxChainError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
