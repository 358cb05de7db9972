"""Command-line interface.

Subcommands: ``solve`` (one re-optimization on a scenario's frozen state),
``simulate`` (full closed-loop rollout to CSV), ``bench`` (batch runs with
CSV/JSON reporting), ``gen`` (write a random scenario suite).

Exit codes: 0 success, 2 solve failure, 3 input/schema error,
4 deadline exceeded (solve mode with --deadline-ms).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench as bench_mod
from . import simulate as sim_mod
from ._backend import backend_name
from .barrier import NewtonConfig
from .errors import RefsafeError
from .solver import ReferenceProblem, solve

EXIT_OK = 0
EXIT_SOLVE_FAILURE = 2
EXIT_INPUT_ERROR = 3
EXIT_DEADLINE = 4


def _config(args) -> NewtonConfig:
    lam = getattr(args, "lam", None)
    return NewtonConfig(lam=lam) if lam else NewtonConfig()


def _cmd_solve(args) -> int:
    scenario = sim_mod.load_scenario(args.scenario)
    _, xp = sim_mod.prefix_state(scenario)
    problem = ReferenceProblem(scenario.ref_region, scenario.op_after, xp, scenario.p)
    report = solve(problem, cfg=_config(args), mode=args.method)
    payload = {
        "scenario_id": scenario.scenario_id,
        "status": report.status.value,
        "reference": None if report.reference is None else [float(v) for v in report.reference],
        "objective_volume": report.objective_volume,
        "margin": report.margin,
        "elapsed_us": report.elapsed_us,
        "reason": report.reason,
        "backend": backend_name(),
    }
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"status           {payload['status']}")
        print(f"reference        {payload['reference']}")
        print(f"objective volume {payload['objective_volume']:.6g}")
        print(f"margin           {payload['margin']:.6g}")
        print(f"elapsed          {payload['elapsed_us']:.1f} us")
        if report.reason:
            print(f"detail           {report.reason}")
    if not report.succeeded:
        return EXIT_SOLVE_FAILURE
    if args.deadline_ms is not None and report.elapsed * 1e3 > args.deadline_ms:
        print(f"deadline of {args.deadline_ms} ms exceeded", file=sys.stderr)
        return EXIT_DEADLINE
    return EXIT_OK


def _cmd_simulate(args) -> int:
    scenario = sim_mod.load_scenario(args.scenario)
    traj, report = sim_mod.run_scenario(scenario, method=args.method, cfg=_config(args))
    sim_mod.trajectory_to_csv(traj, args.out)
    print(
        f"{scenario.scenario_id}: status={report.status.value} switched={traj.switched} "
        f"post_switch_violations={traj.post_switch_violations} -> {args.out}"
    )
    return EXIT_OK if report.succeeded else EXIT_SOLVE_FAILURE


def _load_suite(args):
    if args.spec:
        with open(args.spec) as fh:
            return bench_mod.suite_from_spec(json.load(fh))
    files = sorted(
        os.path.join(args.scenarios, f)
        for f in os.listdir(args.scenarios)
        if f.endswith(".json")
    )
    if not files:
        raise RefsafeError(f"no scenario files in {args.scenarios}")
    return [sim_mod.load_scenario(f) for f in files]


def _cmd_bench(args) -> int:
    scenarios = _load_suite(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    deadline_s = args.deadline_ms / 1e3 if args.deadline_ms is not None else None
    result = bench_mod.run_benchmark(
        scenarios, methods=methods, cfg=_config(args), deadline_s=deadline_s, workers=args.workers
    )
    bench_mod.write_results_csv(result, args.out)
    if args.summary:
        bench_mod.write_summary_json(result, args.summary)
    for method, stats in result.per_method.items():
        print(
            f"{method}: {stats.success_count}/{len(stats.records)} successes "
            f"({100.0 * stats.success_rate:.1f}%)"
        )
    print(f"results -> {args.out}" + (f", summary -> {args.summary}" if args.summary else ""))
    return EXIT_OK


def _cmd_gen(args) -> int:
    suite = bench_mod.generate_scenarios(
        args.n, args.m, args.count, args.seed, shrink_range=(args.shrink_lo, args.shrink_hi)
    )
    os.makedirs(args.out, exist_ok=True)
    for s in suite:
        sim_mod.save_scenario(s, os.path.join(args.out, f"{s.scenario_id}.json"))
    print(f"wrote {len(suite)} scenarios to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refsafe",
        description="Restore reachability safety after an operational-region change "
        "by re-optimizing the controller's reference state online.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one re-optimization on a scenario")
    p_solve.add_argument("--scenario", required=True, help="scenario JSON file")
    p_solve.add_argument("--method", choices=["auto", "kkt-only", "newton-only"], default="auto")
    p_solve.add_argument("--lambda", dest="lam", type=float, default=None, help="barrier weight")
    p_solve.add_argument("--json", action="store_true", help="emit JSON instead of text")
    p_solve.add_argument("--deadline-ms", type=float, default=None)
    p_solve.set_defaults(func=_cmd_solve)

    p_sim = sub.add_parser("simulate", help="simulate a scenario and write the trajectory CSV")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--out", required=True, help="trajectory CSV path")
    p_sim.add_argument("--method", choices=list(sim_mod.METHODS), default="orsop")
    p_sim.add_argument("--lambda", dest="lam", type=float, default=None)
    p_sim.set_defaults(func=_cmd_simulate)

    p_bench = sub.add_parser("bench", help="run a scenario suite under several methods")
    src = p_bench.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="generator spec JSON ({n, m, count, seed, shrink_range})")
    src.add_argument("--scenarios", help="directory of scenario JSON files")
    p_bench.add_argument("--methods", default="orsop,ocr")
    p_bench.add_argument("--deadline-ms", type=float, default=None)
    p_bench.add_argument("--seed", type=int, default=0, help="recorded in outputs")
    p_bench.add_argument("--out", required=True, help="results CSV path")
    p_bench.add_argument("--summary", default=None, help="summary JSON path")
    p_bench.add_argument("--workers", type=int, default=1)
    p_bench.add_argument("--lambda", dest="lam", type=float, default=None)
    p_bench.set_defaults(func=_cmd_bench)

    p_gen = sub.add_parser("gen", help="generate a random scenario suite")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--m", type=int, required=True)
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--shrink-lo", type=float, default=0.55)
    p_gen.add_argument("--shrink-hi", type=float, default=0.95)
    p_gen.set_defaults(func=_cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RefsafeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
