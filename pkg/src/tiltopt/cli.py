"""Command-line entry point.

Verbs:
  run           execute one experiment (see --kind)
  sweep         minimum-rate or location-noise sweeps
  compare       diff two finished runs on the same scenario
  gen-scenario  write a built-in scenario to a file
  validate      check a scenario file against the schema and invariants

Exit codes: 0 success, 2 infeasible/invalid, 3 diverged.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .experiments import (ExperimentSpec, compare_runs, resolve_scenario,
                          run_experiment)
from .model import ScenarioError
from .scenario_io import save_scenario

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_DIVERGED = 3


def _add_common(p):
    p.add_argument("--scenario", required=True,
                   help="scenario file path or builtin:<name> "
                        "(cluster, fairness, pair, smooth, urban)")
    p.add_argument("--outdir", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--utility", choices=("linear", "log"), default="linear")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tiltopt",
        description="Antenna tilt optimisation experiments")
    sub = parser.add_subparsers(dest="verb", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    run_p.add_argument("--kind", required=True,
                       choices=("optimize-P1", "optimize-P2",
                                "fixed-tilt-baseline", "simo-mmse-eval",
                                "grid-search-oracle"))
    _add_common(run_p)
    run_p.add_argument("--stop", choices=("fixed-T", "gap-threshold"),
                       default="fixed-T")
    run_p.add_argument("--change-tol", type=float, default=1e-4)
    run_p.add_argument("--n-samples", type=int, default=300,
                       help="fading samples for simo-mmse-eval")
    run_p.add_argument("--grid-step", type=float, default=0.25,
                       help="grid resolution for grid-search-oracle")

    sweep_p = sub.add_parser("sweep", help="parameter sweeps")
    sweep_p.add_argument("--what", required=True,
                         choices=("minrate", "noise"))
    _add_common(sweep_p)
    sweep_p.add_argument("--values", type=float, nargs="+",
                         help="sweep points (Mbit/s for minrate, "
                              "metres for noise)")
    sweep_p.add_argument("--n-seeds", type=int, default=20)

    cmp_p = sub.add_parser("compare", help="diff two runs")
    cmp_p.add_argument("run_a")
    cmp_p.add_argument("run_b")
    cmp_p.add_argument("--out", help="write the diff report to this file")

    gen_p = sub.add_parser("gen-scenario", help="write a builtin scenario")
    gen_p.add_argument("--builtin", required=True)
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--out", required=True)

    val_p = sub.add_parser("validate", help="validate a scenario file")
    val_p.add_argument("scenario_file")
    return parser


def _spec_from_args(args, kind):
    return ExperimentSpec(
        kind=kind, scenario=args.scenario, outdir=args.outdir,
        alpha=args.alpha, iterations=args.iterations, seed=args.seed,
        stop=getattr(args, "stop", "fixed-T"),
        change_tol=getattr(args, "change_tol", 1e-4),
        utility=args.utility,
        min_rate_sweep_mbps=tuple(getattr(args, "values", None) or ()),
        noise_sigmas_m=tuple(getattr(args, "values", None) or ()),
        n_seeds=getattr(args, "n_seeds", 20),
        n_samples=getattr(args, "n_samples", 300),
        grid_step_deg=getattr(args, "grid_step", 0.25))


def _run(args):
    summary = run_experiment(_spec_from_args(args, args.kind))
    print(json.dumps({k: summary[k] for k in ("kind", "status")}
                     | {"outdir": args.outdir}))
    if summary["status"] == "diverged":
        return EXIT_DIVERGED
    if summary["status"] == "infeasible":
        return EXIT_INFEASIBLE
    return EXIT_OK


def _sweep(args):
    kind = ("minrate-sweep" if args.what == "minrate"
            else "location-noise-sweep")
    summary = run_experiment(_spec_from_args(args, kind))
    print(json.dumps({"kind": kind, "status": summary["status"],
                      "outdir": args.outdir}))
    return EXIT_OK


def _compare(args):
    reports = []
    for d in (args.run_a, args.run_b):
        path = os.path.join(d, "summary.json")
        if not os.path.exists(path):
            print(f"error: no summary.json in {d}", file=sys.stderr)
            return EXIT_INFEASIBLE
        with open(path) as fh:
            reports.append(json.load(fh))
    diff = compare_runs(reports[0], reports[1])
    text = json.dumps(diff, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def _gen_scenario(args):
    net = resolve_scenario(f"builtin:{args.builtin}", seed=args.seed)
    save_scenario(net, args.out)
    print(json.dumps({"written": args.out, "sectors": net.n_sectors,
                      "users": net.n_users}))
    return EXIT_OK


def _validate(args):
    from .scenario_io import load_scenario
    net = load_scenario(args.scenario_file)
    print(json.dumps({"valid": True, "sectors": net.n_sectors,
                      "users": net.n_users}))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": _run, "sweep": _sweep, "compare": _compare,
               "gen-scenario": _gen_scenario, "validate": _validate}
    try:
        return handler[args.verb](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
