"""End-to-end acceptance gate.

Each test exercises one headline property of the optimizer stack:
analytic-gradient correctness, convexity structure, engine convergence
certificates, oracle equivalence, scenario-level throughput and fairness
behaviour, distributed equivalence, and the SIMO evaluation layer.
"""

import time

import numpy as np
import pytest

from tiltopt.distributed import DistributedRun
from tiltopt.experiments import (ExperimentSpec, exact_capped_rates,
                                 grid_search_p1, optimize, pair_scenario,
                                 rate_metrics, run_experiment,
                                 smooth_scenario)
from tiltopt.mmse import ChannelSample, evaluate_simo_throughput, \
    mmse_weights, post_sinr, single_antenna_sinr
from tiltopt.model import cluster_scenario, fairness_scenario, urban_scenario
from tiltopt.problems import (Multipliers, P1, P2, UtilitySpec,
                              make_instance, solve)
from tiltopt.radio import (LinkCache, attenuation_coeff,
                           received_power_exact)
from tiltopt.saddle import (SaddleProblem, gap_certificate,
                            lyapunov_descent_check, run as saddle_run)

EDGE_USERS = (32, 33)      # the two cell-edge users of the fairness layout


# ---------------------------------------------------------------------------
# shared expensive runs

@pytest.fixture(scope="module")
def fairness_runs(fairness_net):
    """Converged tilt vectors for both problem variants on one scenario."""
    _, tr1 = optimize(fairness_net, P1, alpha=0.05, T=3000)
    _, tr2 = optimize(fairness_net, P2, alpha=0.3, T=12000)
    assert not tr1.diverged and not tr2.diverged
    return tr1.tail_average_x(0.1), tr2.tail_average_x(0.1)


@pytest.fixture(scope="module")
def urban_run():
    """Proportional-fair optimization of the synthetic urban drop."""
    net = urban_scenario(seed=0)
    _, trace = optimize(net, P2, alpha=0.01, T=12000)
    assert not trace.diverged
    return net, trace.tail_average_x(0.1)


# ---------------------------------------------------------------------------
# analytic subgradients vs central finite differences

def _gradient_suite(net, variant, n_points, rng, step=1e-4, kink_margin=0.05):
    inst = make_instance(net, variant)
    lo, hi = net.tilt_bounds()
    B, U = net.n_sectors, net.n_users
    worst = 0.0
    checked = attempts = 0
    while checked < n_points:
        attempts += 1
        assert attempts < 50 * n_points, "cannot sample away from kinks"
        tilts = rng.uniform(lo + 0.5, hi - 0.5)
        _, raw = inst.capped_rates(tilts)
        if np.any(np.abs(raw - net.rate_cap) < kink_margin):
            continue
        lam = Multipliers(rng.uniform(0.0, 1.0, U),
                          rng.uniform(0.0, 1.0, B),
                          rng.uniform(0.0, 1.0, B))
        analytic, d_lam = inst.full_subgradients(tilts, lam)
        fd = np.empty(B)
        for b in range(B):
            e = np.zeros(B)
            e[b] = step
            fd[b] = (inst.lagrangian(tilts + e, lam)
                     - inst.lagrangian(tilts - e, lam)) / (2.0 * step)
        err = (np.linalg.norm(analytic - fd)
               / max(np.linalg.norm(fd), 1e-9))
        worst = max(worst, err)
        # the dual subgradient is the constraint vector itself
        assert np.allclose(d_lam.concat(), inst.constraint_values(tilts),
                           rtol=1e-12, atol=1e-12)
        checked += 1
    return worst


def test_gradient_suite_matches_finite_differences():
    start = time.monotonic()
    rng = np.random.default_rng(42)
    scenarios = (pair_scenario(), smooth_scenario(), cluster_scenario(),
                 fairness_scenario())
    for net in scenarios:
        for variant in (P1, P2):
            worst = _gradient_suite(net, variant, n_points=200, rng=rng)
            assert worst <= 1e-5
    assert time.monotonic() - start < 60.0


# ---------------------------------------------------------------------------
# convexity / concavity structure

def test_log_gain_curvature_is_constant():
    # second central difference of the log vertical gain in the tilt is
    # the constant -2.4 ln(10) / beamwidth^2
    net = pair_scenario()
    s = net.sectors[0]
    u = net.users[2]
    expect = -2.0 * attenuation_coeff(s.beamwidth_deg)
    h = 0.1
    rng = np.random.default_rng(1)
    for tilt in rng.uniform(6.0, 19.0, 1000):
        f = lambda t: np.log(received_power_exact(s, u, t, net))
        second = (f(tilt + h) - 2.0 * f(tilt) + f(tilt - h)) / h ** 2
        assert second == pytest.approx(expect, rel=1e-6)


def test_midpoint_convexity_suite():
    start = time.monotonic()
    net = smooth_scenario()           # every sector serves >= 1 user
    cache = LinkCache.build(net)
    ref = net.initial_tilts()
    lo, hi = net.tilt_bounds()
    inst1 = make_instance(net, P1)
    rng = np.random.default_rng(7)
    slack = 1e-9
    strict_margin = np.inf
    for _ in range(1000):
        x = rng.uniform(lo, hi)
        y = rng.uniform(lo, hi)
        m = 0.5 * (x + y)
        # log of interference-plus-noise is convex in the tilt vector
        li = lambda t: np.log(cache.interference(t, ref))
        assert np.all(li(m) <= 0.5 * (li(x) + li(y)) + slack)
        # high-SINR rates are concave in the tilt vector
        rh = lambda t: cache.rates_high_sinr(t, ref)
        assert np.all(rh(m) >= 0.5 * (rh(x) + rh(y)) - slack)
        # ... and their sum strictly so when every sector serves a user
        strict_margin = min(strict_margin,
                            rh(m).sum() - 0.5 * (rh(x).sum() + rh(y).sum()))
        # log of the exact rate is concave in the tilt vector
        lr = lambda t: np.log(cache.rates(t, ref))
        assert np.all(lr(m) >= 0.5 * (lr(x) + lr(y)) - slack)
        # the capped P1 objective is concave
        ob = inst1.objective
        assert ob(m) >= 0.5 * (ob(x) + ob(y)) - slack
    assert strict_margin > 0.0
    # utility derivative: positive and nonincreasing for both kinds
    r = np.sort(rng.uniform(0.01, 50.0, 1000))
    for spec in (UtilitySpec.linear(), UtilitySpec.log()):
        d = spec.deriv(r)
        assert np.all(d > 0)
        assert np.all(np.diff(d) <= slack)
    assert time.monotonic() - start < 60.0


# ---------------------------------------------------------------------------
# saddle-engine certificate on the toy problem

def test_toy_saddle_convergence_certificates():
    start = time.monotonic()
    problem = SaddleProblem(
        n=1, m=1,
        f=lambda x: float(x[0] ** 2),
        g=lambda x: np.array([1.0 - x[0]]),
        subgrad_x=lambda x, u: np.array([2.0 * x[0] - u[0]]))
    x_star, u_star = np.array([1.0]), np.array([2.0])
    for alpha in (0.05, 0.01):
        trace = saddle_run(problem, np.array([0.0]), np.array([0.0]),
                           alpha=alpha, T=10_000)
        dist = np.hypot(trace.final_x[0] - 1.0, trace.final_u[0] - 2.0)
        assert dist <= 3.0 * alpha
        cert = gap_certificate(problem, trace, x_star, u_star)
        assert cert["nonnegative"] and cert["bounded"]
        ok, _ = lyapunov_descent_check(problem, trace, x_star, u_star)
        assert ok
    assert time.monotonic() - start < 5.0


# ---------------------------------------------------------------------------
# brute-force equivalence on a 2-sector / 4-user instance

def test_optimizer_matches_grid_search_oracle():
    net = pair_scenario()
    assert net.n_sectors == 2 and net.n_users == 4
    inst, trace = optimize(net, P1, alpha=0.05, T=2000)
    theta = trace.tail_average_x(0.1)
    theta_grid, val_grid = grid_search_p1(net, grid_step=0.25)
    assert np.abs(theta - theta_grid).max() <= 0.25
    rel_gap = abs(inst.objective(theta) - val_grid) / abs(val_grid)
    assert rel_gap <= 1e-3


# ---------------------------------------------------------------------------
# cluster-scenario throughput gain

def test_cluster_convergence_and_throughput_gain(cluster_net):
    _, trace = optimize(cluster_net, P1, alpha=0.05, T=1500,
                        stop="gap-threshold", change_tol=1e-4)
    assert not trace.diverged
    assert trace.stop_reason == "primal change below threshold"
    assert len(trace) - 1 <= 1500
    theta = trace.tail_average_x(0.1)
    base = exact_capped_rates(cluster_net,
                              cluster_net.initial_tilts()).sum()
    opt = exact_capped_rates(cluster_net, theta).sum()
    assert opt / base >= 5.0


# ---------------------------------------------------------------------------
# fairness ordering between the two variants

def test_fairness_ordering_between_variants(fairness_net, fairness_runs):
    theta1, theta2 = fairness_runs
    r1 = exact_capped_rates(fairness_net, theta1)
    r2 = exact_capped_rates(fairness_net, theta2)
    assert r1.sum() >= r2.sum()
    assert np.log(r2).sum() >= np.log(r1).sum()
    for u in EDGE_USERS:
        assert r2[u] > r1[u]


# ---------------------------------------------------------------------------
# minimum-rate sweep

def test_minrate_sweep_monotone_with_infeasibility(tmp_path):
    spec = ExperimentSpec(
        kind="minrate-sweep", scenario="builtin:pair",
        outdir=str(tmp_path), alpha=0.05, iterations=2000,
        min_rate_sweep_mbps=(0.0, 20.0, 40.0, 50.0, 60.0, 70.0,
                             75.0, 90.0, 150.0))
    summary = run_experiment(spec)
    feasible = [r for r in summary["sweep"] if r["feasible"]]
    assert len(feasible) >= 3
    sums = [r["sum_rate_per_user"] for r in feasible]
    assert all(a >= b - 1e-9 for a, b in zip(sums, sums[1:]))
    assert summary["first_infeasible_mbps"] is not None


# ---------------------------------------------------------------------------
# robustness to reported-location noise

def test_location_noise_robustness(tmp_path):
    spec = ExperimentSpec(
        kind="location-noise-sweep", scenario="builtin:cluster",
        outdir=str(tmp_path), alpha=0.05, iterations=500,
        noise_sigmas_m=(0.0, 50.0), n_seeds=20)
    summary = run_experiment(spec)
    assert summary["sweep"][0]["sigma_m"] == 0.0
    assert summary["sweep"][1]["n_seeds"] == 20
    assert summary["relative_loss"][1] < 0.10


# ---------------------------------------------------------------------------
# distributed execution reproduces the centralized engine

def test_distributed_equivalence(smooth_net):
    start = time.monotonic()
    for variant in (P1, P2):
        inst = make_instance(smooth_net, variant)
        dist = DistributedRun(inst, interference_floor=0.0, drop_prob=0.0)
        dist.run(alpha=0.05, rounds=500)
        central = solve(inst, alpha=0.05, T=500)
        assert np.abs(dist.tilts() - central.final_x).max() <= 1e-12
        assert np.abs(dist.multipliers().concat()
                      - central.final_u).max() <= 1e-12
    assert time.monotonic() - start < 60.0


# ---------------------------------------------------------------------------
# SIMO / MMSE evaluation layer

def test_mmse_reduction_and_dominance():
    rng = np.random.default_rng(5)
    # no interferer: LMMSE collapses to P ||k||^2 / N0
    for _ in range(100):
        k = rng.normal(size=2) + 1j * rng.normal(size=2)
        s = ChannelSample(k=k, v=np.zeros(2, dtype=complex),
                          n0=float(rng.uniform(0.05, 2.0)), cmax=0,
                          shadow_db=None)
        P = float(rng.uniform(0.1, 10.0))
        got = post_sinr(s, mmse_weights(s, P), P)
        want = P * float(np.abs(k[0]) ** 2 + np.abs(k[1]) ** 2) / s.n0
        assert abs(got - want) / want <= 1e-10
    # combining never loses to the best single antenna
    for _ in range(1000):
        k = rng.normal(size=2) + 1j * rng.normal(size=2)
        v = rng.uniform(0.0, 3.0) * (rng.normal(size=2)
                                     + 1j * rng.normal(size=2))
        s = ChannelSample(k=k, v=v, n0=float(rng.uniform(0.01, 2.0)),
                          cmax=0, shadow_db=None)
        P = float(rng.uniform(0.1, 10.0))
        g = post_sinr(s, mmse_weights(s, P), P)
        best = max(single_antenna_sinr(s, P, antenna=0),
                   single_antenna_sinr(s, P, antenna=1))
        assert g >= best * (1.0 - 1e-10)


def test_epsilon_binned_gain_ordering(urban_run):
    # tilt optimisation buys less once MMSE already cancels the dominant
    # interferer; the effect is strongest where one interferer dominates
    # (epsilon near 1), so the relative gain reduction from single-antenna
    # to MMSE reception must be larger in the high-epsilon bin
    net, theta_opt = urban_run
    report = evaluate_simo_throughput(net, net.initial_tilts(), theta_opt,
                                      n_samples=200, seed=0)
    gains = report["gains_by_bin"]
    lo, hi = gains["eps_0.0_0.5"], gains["eps_0.8_1.0"]
    assert lo["n_users"] >= 20 and hi["n_users"] >= 20
    reduction_lo = 1.0 - lo["simo_gain_pct"] / lo["siso_gain_pct"]
    reduction_hi = 1.0 - hi["simo_gain_pct"] / hi["siso_gain_pct"]
    assert reduction_hi > reduction_lo


# ---------------------------------------------------------------------------
# urban-scale proportional-fair gains

def test_urban_proportional_fair_gains(urban_run):
    net, theta_opt = urban_run
    assert net.n_sectors >= 15 and net.n_users >= 300
    base = rate_metrics(net, net.initial_tilts())
    opt = rate_metrics(net, theta_opt)
    assert (opt["sum_log_rate_per_user"]
            > base["sum_log_rate_per_user"] + 0.1)
    assert opt["median_rate"] / base["median_rate"] >= 1.5
