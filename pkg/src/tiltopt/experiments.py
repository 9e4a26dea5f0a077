"""Experiment runners: one function per reported experiment family.

Every run is a pure function of (spec, seed): it writes delimited outputs
(CSV traces, JSON summaries) plus rendered figures into the spec's output
directory and returns the summary dict.  Sum metrics are normalized by the
user count throughout.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from dataclasses import dataclass

import numpy as np

from . import plots
from .distributed import inject_location_noise
from .mmse import evaluate_simo_throughput
from .model import (ClusterSpec, HexScenarioSpec, ScenarioError,
                    build_hex_scenario, cluster_scenario, fairness_scenario,
                    mbps_to_rate, urban_scenario)
from .problems import P1, P2, UtilitySpec, make_instance, solve
from .radio import LinkCache
from .scenario_io import load_scenario

KINDS = ("optimize-P1", "optimize-P2", "fixed-tilt-baseline", "minrate-sweep",
         "location-noise-sweep", "simo-mmse-eval", "grid-search-oracle")


@dataclass
class ExperimentSpec:
    kind: str
    scenario: str                    # file path or builtin:<name>
    outdir: str
    alpha: float = 0.05
    iterations: int = 2000
    seed: int = 0
    stop: str = "fixed-T"
    change_tol: float = 1e-4
    utility: str = "linear"          # P1 utility kind
    min_rate_sweep_mbps: tuple = ()  # minrate-sweep values
    noise_sigmas_m: tuple = ()       # location-noise-sweep values
    n_seeds: int = 20                # seeds per sweep point
    n_samples: int = 300             # fading samples for the SIMO evaluation
    grid_step_deg: float = 0.25      # grid-search-oracle resolution

    def validate(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown experiment kind {self.kind!r}")
        if self.alpha <= 0 or self.iterations < 1:
            raise ScenarioError("need alpha > 0 and iterations >= 1")


# ---------------------------------------------------------------------------
# built-in scenarios

def pair_scenario(seed=0):
    """Two single-sector sites, two users each; interior optimum, loose cap."""
    spec = HexScenarioSpec(
        n_sites=2, sectors_per_site=1, isd_m=500.0, layout="line",
        radio={"max_rate_mbps": 200.0},
        clusters=[ClusterSpec(site=0, sector=0, n_users=2, distance_m=150.0,
                              radius_m=20.0),
                  ClusterSpec(site=1, sector=0, n_users=2, distance_m=150.0,
                              radius_m=20.0)],
        association="explicit", seed=seed)
    return build_hex_scenario(spec)


def smooth_scenario(seed=0):
    """Six sectors on two sites, two users per sector, no active caps.

    Every constraint stays inactive along the trajectory, which makes the
    dynamics a smooth contraction; used for the distributed-equivalence and
    step-size studies.
    """
    clusters = [ClusterSpec(site=s, sector=k, n_users=2, distance_m=150.0,
                            radius_m=25.0)
                for s in range(2) for k in range(3)]
    spec = HexScenarioSpec(
        n_sites=2, sectors_per_site=3, isd_m=500.0, layout="line",
        radio={"max_rate_mbps": 500.0},
        clusters=clusters, association="explicit", seed=seed)
    return build_hex_scenario(spec)


def resolve_scenario(ref, seed=0):
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        builders = {
            "cluster": lambda: cluster_scenario(seed=seed),
            "fairness": lambda: fairness_scenario(seed=seed),
            "pair": lambda: pair_scenario(seed=seed),
            "smooth": lambda: smooth_scenario(seed=seed),
            "urban": lambda: urban_scenario(seed=seed),
        }
        if name not in builders:
            raise ScenarioError(
                f"unknown builtin scenario {name!r}; "
                f"choose from {sorted(builders)}")
        return builders[name]()
    return load_scenario(ref)


def scenario_fingerprint(net):
    """Stable digest of the scenario geometry and channel constants."""
    payload = {
        "sectors": [[s.id, s.x_km, s.y_km, s.azimuth_deg, s.power_mw,
                     s.max_gain, s.beamwidth_deg] for s in net.sectors],
        "users": [[u.id, u.x_km, u.y_km, u.noise_mw] for u in net.users],
        "association": sorted(net.association.items()),
        "radio": [net.rho0, net.beta, net.bandwidth_mhz, net.kappa,
                  net.rate_cap, net.rate_floor, net.height_m],
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# metric helpers

def exact_capped_rates(net, tilts, ref_tilts=None, cache=None):
    if cache is None:
        cache = LinkCache.build(net)
    if ref_tilts is None:
        ref_tilts = net.initial_tilts()
    return cache.capped(cache.rates(tilts, ref_tilts))


def rate_metrics(net, tilts, ref_tilts=None, cache=None):
    r = exact_capped_rates(net, tilts, ref_tilts, cache)
    return {
        "sum_rate_per_user": float(r.mean()),
        "sum_log_rate_per_user": float(np.log(r).mean()),
        "median_rate": float(np.median(r)),
        "min_rate": float(r.min()),
    }


def _utility_for(spec):
    if spec.utility == "linear":
        return UtilitySpec.linear()
    if spec.utility == "log":
        return UtilitySpec.log()
    raise ScenarioError(f"unknown utility {spec.utility!r}")


def optimize(net, variant, alpha, T, stop="fixed-T", change_tol=1e-4,
             utility=None, use_reported_geometry=False):
    """Build an instance, run the engine, return (instance, trace)."""
    inst = make_instance(net, variant, utility=utility,
                         use_reported_geometry=use_reported_geometry)
    trace = solve(inst, alpha=alpha, T=T, stop=stop, change_tol=change_tol)
    return inst, trace


def grid_search_p1(net, grid_step=0.25, utility=None):
    """Exhaustive P1 objective maximisation over the feasible tilt grid.

    Only honors the min-rate constraint when checking feasibility; intended
    for tiny sector counts (cost grows exponentially with |B|).
    """
    if net.n_sectors > 3:
        raise ScenarioError("grid search limited to <= 3 sectors")
    inst = make_instance(net, P1, utility=utility)
    lo, hi = net.tilt_bounds()
    axes = [np.arange(lo[b], hi[b] + 1e-9, grid_step)
            for b in range(net.n_sectors)]
    best_val, best_tilt = -np.inf, None
    for combo in itertools.product(*axes):
        tilts = np.array(combo)
        capped, _ = inst.capped_rates(tilts)
        if (capped < net.rate_floor - 1e-12).any():
            continue
        val = inst.objective(tilts)
        if val > best_val:
            best_val, best_tilt = val, tilts
    if best_tilt is None:
        raise ScenarioError("no feasible grid point")
    return best_tilt, float(best_val)


# ---------------------------------------------------------------------------
# experiment dispatch

def run_experiment(spec):
    spec.validate()
    os.makedirs(spec.outdir, exist_ok=True)
    net = resolve_scenario(spec.scenario, seed=spec.seed)
    runner = {
        "fixed-tilt-baseline": _run_baseline,
        "optimize-P1": _run_optimize,
        "optimize-P2": _run_optimize,
        "minrate-sweep": _run_minrate_sweep,
        "location-noise-sweep": _run_noise_sweep,
        "simo-mmse-eval": _run_simo,
        "grid-search-oracle": _run_grid_oracle,
    }[spec.kind]
    summary = runner(spec, net)
    summary.setdefault("status", "ok")
    summary["kind"] = spec.kind
    summary["scenario"] = spec.scenario
    summary["scenario_fingerprint"] = scenario_fingerprint(net)
    summary["seed"] = spec.seed
    with open(os.path.join(spec.outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    return summary


def _run_baseline(spec, net):
    tilts = net.initial_tilts()
    rates = exact_capped_rates(net, tilts)
    _write_rates_csv(os.path.join(spec.outdir, "rates.csv"),
                     {"baseline": rates})
    plots.rate_cdf({"fixed tilt": rates},
                   os.path.join(spec.outdir, "rate_cdf.png"))
    return {"tilts": tilts.tolist(),
            "per_user_rates": rates.tolist(),
            **rate_metrics(net, tilts)}


def _run_optimize(spec, net):
    variant = P1 if spec.kind == "optimize-P1" else P2
    utility = _utility_for(spec) if variant == P1 else None
    inst, trace = optimize(net, variant, spec.alpha, spec.iterations,
                           stop=spec.stop, change_tol=spec.change_tol,
                           utility=utility)
    theta = trace.tail_average_x(0.1)
    baseline = net.initial_tilts()
    r_base = exact_capped_rates(net, baseline, cache=inst.cache)
    r_opt = exact_capped_rates(net, theta, cache=inst.cache)
    trace.to_csv(os.path.join(spec.outdir, "trace.csv"))
    plots.tilt_trajectories([x for x in trace.x],
                            os.path.join(spec.outdir, "tilts.png"),
                            alpha=spec.alpha)
    plots.rate_cdf({"fixed tilt": r_base, "optimized": r_opt},
                   os.path.join(spec.outdir, "rate_cdf.png"))
    if net.n_users <= 60:
        plots.per_user_rates({"fixed tilt": r_base, "optimized": r_opt},
                             os.path.join(spec.outdir, "per_user.png"))
    feas = inst.feasibility_check(theta, trace)
    status = "ok"
    if trace.diverged:
        status = "diverged"
    elif feas["suspected_infeasible"] or feas["min_rate_violations"]:
        status = "infeasible"
    summary = {
        "status": status,
        "variant": variant,
        "alpha": spec.alpha,
        "iterations": len(trace) - 1,
        "converged_tilts": theta.tolist(),
        "final_tilts": trace.final_x.tolist(),
        "max_final_step_change": trace.max_step_change(),
        "per_user_rates": r_opt.tolist(),
        "per_user_rates_baseline": r_base.tolist(),
        "objective": inst.objective(theta),
        "feasibility": feas,
        "sign_assumption_violations": inst.cache.sign_violations(theta),
        "baseline": rate_metrics(net, baseline, cache=inst.cache),
        "optimized": rate_metrics(net, theta, cache=inst.cache),
    }
    summary["throughput_gain_factor"] = (
        summary["optimized"]["sum_rate_per_user"]
        / summary["baseline"]["sum_rate_per_user"])
    return summary


def _run_minrate_sweep(spec, net):
    values = spec.min_rate_sweep_mbps or (0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0)
    rows = []
    first_infeasible = None
    for v in values:
        floor = mbps_to_rate(v)
        if floor >= net.rate_cap:
            rows.append({"min_rate_mbps": v, "feasible": False,
                         "sum_rate_per_user": None})
            if first_infeasible is None:
                first_infeasible = v
            continue
        net_v = net.with_rates(rate_floor=floor)
        inst, trace = optimize(net_v, P1, spec.alpha, spec.iterations,
                               utility=_utility_for(spec))
        if trace.diverged:
            rows.append({"min_rate_mbps": v, "feasible": False,
                         "sum_rate_per_user": None})
            if first_infeasible is None:
                first_infeasible = v
            continue
        theta = trace.tail_average_x(0.1)
        feas = inst.feasibility_check(theta, trace)
        feasible = not (feas["suspected_infeasible"]
                        or feas["min_rate_violations"])
        if not feasible and first_infeasible is None:
            first_infeasible = v
        rows.append({"min_rate_mbps": v, "feasible": feasible,
                     **rate_metrics(net_v, theta, cache=inst.cache)})
    with open(os.path.join(spec.outdir, "sweep.csv"), "w") as fh:
        fh.write("min_rate_mbps,feasible,sum_rate_per_user\n")
        for r in rows:
            fh.write(f"{r['min_rate_mbps']},{int(r['feasible'])},"
                     f"{r.get('sum_rate_per_user')}\n")
    feas_rows = [r for r in rows if r["feasible"]]
    plots.sweep_curve([r["min_rate_mbps"] for r in feas_rows],
                      [r["sum_rate_per_user"] for r in feas_rows],
                      os.path.join(spec.outdir, "sweep.png"),
                      xlabel="minimum rate (Mbit/s)",
                      ylabel="sum throughput per user",
                      infeasible_from=first_infeasible)
    return {"sweep": rows, "first_infeasible_mbps": first_infeasible,
            "status": "ok"}


def _run_noise_sweep(spec, net):
    sigmas = spec.noise_sigmas_m or (0.0, 10.0, 25.0, 50.0, 100.0)
    variant = P2 if spec.utility == "log" else P1
    rows = []
    for sigma in sigmas:
        sums = []
        for k in range(spec.n_seeds):
            reported = inject_location_noise(net, sigma,
                                             seed=spec.seed + 1000 * k + 1)
            net_k = net.with_reported_positions(reported)
            inst, trace = optimize(net_k, variant, spec.alpha,
                                   spec.iterations,
                                   use_reported_geometry=True)
            theta = trace.tail_average_x(0.1)
            sums.append(rate_metrics(net_k, theta,
                                     cache=inst.cache)["sum_rate_per_user"])
        rows.append({"sigma_m": sigma,
                     "mean_sum_rate_per_user": float(np.mean(sums)),
                     "std_sum_rate_per_user": float(np.std(sums)),
                     "n_seeds": spec.n_seeds})
    with open(os.path.join(spec.outdir, "noise_sweep.csv"), "w") as fh:
        fh.write("sigma_m,mean_sum_rate_per_user,std_sum_rate_per_user\n")
        for r in rows:
            fh.write(f"{r['sigma_m']},{r['mean_sum_rate_per_user']},"
                     f"{r['std_sum_rate_per_user']}\n")
    plots.sweep_curve([r["sigma_m"] for r in rows],
                      [r["mean_sum_rate_per_user"] for r in rows],
                      os.path.join(spec.outdir, "noise_sweep.png"),
                      xlabel="location noise sigma (m)",
                      ylabel="mean sum throughput per user")
    base = rows[0]["mean_sum_rate_per_user"]
    return {"sweep": rows,
            "relative_loss": [(base - r["mean_sum_rate_per_user"]) / base
                              for r in rows],
            "status": "ok"}


def _run_simo(spec, net):
    inst, trace = optimize(net, P2, spec.alpha, spec.iterations)
    theta_opt = trace.tail_average_x(0.1)
    report = evaluate_simo_throughput(net, net.initial_tilts(), theta_opt,
                                      n_samples=spec.n_samples,
                                      seed=spec.seed)
    with open(os.path.join(spec.outdir, "gains_by_bin.json"), "w") as fh:
        json.dump(report["gains_by_bin"], fh, indent=2)
    qs = np.linspace(0.0, 1.0, 101)
    with open(os.path.join(spec.outdir, "throughput_cdf.csv"), "w") as fh:
        fh.write("quantile,fixed_siso,fixed_simo,opt_siso,opt_simo\n")
        t = report["throughput"]
        for q in qs:
            fh.write(",".join([
                f"{q:.2f}",
                repr(float(np.quantile(t['fixed']['siso'], q))),
                repr(float(np.quantile(t['fixed']['simo_mmse'], q))),
                repr(float(np.quantile(t['optimized']['siso'], q))),
                repr(float(np.quantile(t['optimized']['simo_mmse'], q))),
            ]) + "\n")
    plots.rate_cdf(
        {"fixed, 1 antenna": report["throughput"]["fixed"]["siso"],
         "fixed, MMSE": report["throughput"]["fixed"]["simo_mmse"],
         "optimized, 1 antenna": report["throughput"]["optimized"]["siso"],
         "optimized, MMSE": report["throughput"]["optimized"]["simo_mmse"]},
        os.path.join(spec.outdir, "simo_cdf.png"))
    return {"gains_by_bin": report["gains_by_bin"],
            "theta_opt": theta_opt.tolist(),
            "n_samples": spec.n_samples,
            "status": "ok"}


def _run_grid_oracle(spec, net):
    utility = _utility_for(spec)
    inst, trace = optimize(net, P1, spec.alpha, spec.iterations,
                           utility=utility)
    theta_alg = trace.tail_average_x(0.1)
    theta_grid, val_grid = grid_search_p1(net, spec.grid_step_deg,
                                          utility=utility)
    val_alg = inst.objective(theta_alg)
    return {
        "algorithm_tilts": theta_alg.tolist(),
        "grid_tilts": theta_grid.tolist(),
        "grid_step_deg": spec.grid_step_deg,
        "max_tilt_difference_deg": float(
            np.abs(theta_alg - theta_grid).max()),
        "objective_algorithm": val_alg,
        "objective_grid": val_grid,
        "objective_rel_gap": float(abs(val_alg - val_grid)
                                   / max(1e-12, abs(val_grid))),
        "status": "ok",
    }


def _write_rates_csv(path, rate_sets):
    labels = list(rate_sets)
    n = len(next(iter(rate_sets.values())))
    with open(path, "w") as fh:
        fh.write("user," + ",".join(labels) + "\n")
        for i in range(n):
            fh.write(str(i) + ","
                     + ",".join(repr(float(rate_sets[k][i]))
                                for k in labels) + "\n")


def compare_runs(summary_a, summary_b):
    """Diff report between two run summaries on the same scenario."""
    if (summary_a["scenario_fingerprint"]
            != summary_b["scenario_fingerprint"]):
        raise ScenarioError("runs refer to different scenarios")
    ra = np.asarray(summary_a["per_user_rates"], dtype=float)
    rb = np.asarray(summary_b["per_user_rates"], dtype=float)
    return {
        "sum_rate_per_user": [float(ra.mean()), float(rb.mean())],
        "sum_log_rate_per_user": [float(np.log(ra).mean()),
                                  float(np.log(rb).mean())],
        "per_user_delta": (rb - ra).tolist(),
        "higher_sum_rate": "a" if ra.mean() >= rb.mean() else "b",
        "higher_sum_log": ("a" if np.log(ra).mean() >= np.log(rb).mean()
                           else "b"),
    }
