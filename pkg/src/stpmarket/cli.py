"""Command-line front door.

Exit codes: 0 on success, 1 when a verification or assertion fails, 2 for
usage and input errors. Every command is deterministic given its flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .economy import EconomyFormatError, load_economy, validate_economy
from .experiments import ScenarioParams, aggregate, export_results, run_batch
from .fixtures import fixture_names, run_fixture
from .flow import build_network, dump_network, solve_min_cost_flow
from .mechanisms import (
    MECHANISM_NAMES,
    _action_from_text,
    make_mechanism,
    run_simulation,
    single_deviation_regret,
    trace_to_text,
)
from .planner import plan_driver_optimal, plan_driver_pessimal, plan_to_text, verify_ce

USAGE_ERROR = 2
CHECK_FAILED = 1


def _load_econ(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        print(f"cannot read economy file: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    try:
        econ = load_economy(text)
    except EconomyFormatError as exc:
        print(f"bad economy file: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    report = validate_economy(econ)
    if not report.ok:
        for v in report.violations:
            print(f"invalid economy: {v}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    return econ


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        print(text, end="")


def cmd_plan(args: argparse.Namespace) -> int:
    econ = _load_econ(args.econ)
    plan = plan_driver_optimal(econ) if args.kind == "optimal" else plan_driver_pessimal(econ)
    report = verify_ce(econ, plan)
    text = plan_to_text(econ, plan) + report.summary() + "\n"
    _write_or_print(text, args.out)
    return 0 if report.ok else CHECK_FAILED


def cmd_verify_example(args: argparse.Namespace) -> int:
    names = fixture_names() if args.name == "all" else [args.name]
    for name in names:
        if name not in fixture_names():
            print(f"unknown fixture {name!r}; known: {', '.join(fixture_names())}",
                  file=sys.stderr)
            return USAGE_ERROR
    failed = False
    for name in names:
        result = run_fixture(name)
        print(f"{'PASS' if result.ok else 'FAIL'} {name}")
        if not result.ok or args.verbose:
            for line in result.details:
                print(f"  {line}")
        failed |= not result.ok
    return CHECK_FAILED if failed else 0


def cmd_regret(args: argparse.Namespace) -> int:
    econ = _load_econ(args.econ)
    if not 0 <= args.driver < econ.n_drivers:
        print(f"driver index out of range (economy has {econ.n_drivers})", file=sys.stderr)
        return USAGE_ERROR
    mech = make_mechanism(args.mechanism, seed=args.seed)
    value = single_deviation_regret(econ, mech, args.driver, seed=args.seed)
    print(f"driver {args.driver} single-deviation regret under {args.mechanism}: {value}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    econ = _load_econ(args.econ)
    overrides = []
    if args.script:
        try:
            entries = json.loads(Path(args.script).read_text())
            overrides = [
                (int(i), int(t), _action_from_text(econ, act)) for i, t, act in entries
            ]
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            print(f"bad strategy script: {exc}", file=sys.stderr)
            return USAGE_ERROR
    mech = make_mechanism(args.mechanism, seed=args.seed)
    trace = run_simulation(econ, mech, seed=args.seed, overrides=overrides)
    text = trace_to_text(econ, trace)
    text += f"welfare {trace.welfare(econ)}\n"
    _write_or_print(text, args.out)
    return 0


def cmd_batch(args: argparse.Namespace) -> int:
    try:
        sweep = tuple(int(x) for x in args.sweep.split(",") if x != "")
    except ValueError:
        print("sweep must be a comma-separated list of integers", file=sys.stderr)
        return USAGE_ERROR
    params = ScenarioParams(
        scenario=args.scenario,
        sweep=sweep,
        reps=args.reps,
        base_seed=args.seed,
        scale=args.scale,
        compute_regret={"on": True, "off": False, "auto": None}[args.regret],
    )
    try:
        table = run_batch(params, mechanisms=args.mechanisms)
    except ValueError as exc:
        print(f"bad batch parameters: {exc}", file=sys.stderr)
        return USAGE_ERROR
    files = export_results(table, args.out)
    agg = aggregate(table)
    print(f"scenario {args.scenario}: wrote {len(files)} files under {args.out}")
    for sweep_value, mech, _, mean, std, n in agg["welfare"]:
        print(f"  welfare sweep={sweep_value} {mech}: mean={mean:.1f} std={std:.1f} n={n}")
    return 0


def cmd_dump_network(args: argparse.Namespace) -> int:
    econ = _load_econ(args.econ)
    net = build_network(econ)
    flow = solve_min_cost_flow(net) if args.solve else None
    if flow is not None:
        print(f"welfare {flow.welfare}")
    print(dump_network(net, flow), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stpmarket",
        description="Plan, price, simulate, and stress-test ridesharing markets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="compute and verify a priced plan for an economy file")
    p.add_argument("--econ", required=True)
    p.add_argument("--kind", choices=("pessimal", "optimal"), default="pessimal")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("verify-example", help="run a built-in benchmark economy's checks")
    p.add_argument("name", help="fixture name, or 'all'")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_verify_example)

    p = sub.add_parser("regret", help="single-deviation regret of one driver")
    p.add_argument("--econ", required=True)
    p.add_argument("--mechanism", choices=MECHANISM_NAMES, default="stp")
    p.add_argument("--driver", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_regret)

    p = sub.add_parser("simulate", help="run one simulation and dump the trace")
    p.add_argument("--econ", required=True)
    p.add_argument("--mechanism", choices=MECHANISM_NAMES, default="stp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--script", help="JSON list of [driver, t, action] overrides")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("batch", help="sweep a scenario and export metric CSVs")
    p.add_argument("--scenario", choices=("event", "rush", "airport"), required=True)
    p.add_argument("--sweep", required=True, help="comma-separated sweep values")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--mechanisms", nargs="+", choices=MECHANISM_NAMES)
    p.add_argument("--regret", choices=("auto", "on", "off"), default="auto")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("dump-network", help="dump the trip network edge list")
    p.add_argument("--econ", required=True)
    p.add_argument("--solve", action="store_true")
    p.set_defaults(func=cmd_dump_network)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
