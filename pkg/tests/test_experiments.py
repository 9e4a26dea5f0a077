import numpy as np
import pytest

from tiltopt.experiments import (ExperimentSpec, compare_runs,
                                 exact_capped_rates, grid_search_p1,
                                 rate_metrics, resolve_scenario,
                                 run_experiment, scenario_fingerprint)
from tiltopt.model import ScenarioError


def test_resolve_builtin_names():
    for name in ("cluster", "fairness", "pair", "smooth"):
        net = resolve_scenario(f"builtin:{name}", seed=0)
        assert net.n_users > 0
    with pytest.raises(ScenarioError):
        resolve_scenario("builtin:downtown")


def test_fingerprint_sensitivity(pair_net, cluster_net):
    assert scenario_fingerprint(pair_net) == scenario_fingerprint(pair_net)
    assert scenario_fingerprint(pair_net) != scenario_fingerprint(cluster_net)


def test_rate_metrics_keys(pair_net):
    m = rate_metrics(pair_net, pair_net.initial_tilts())
    assert set(m) == {"sum_rate_per_user", "sum_log_rate_per_user",
                      "median_rate", "min_rate"}
    r = exact_capped_rates(pair_net, pair_net.initial_tilts())
    assert m["sum_rate_per_user"] == pytest.approx(r.mean())
    assert m["min_rate"] <= m["median_rate"]


def test_grid_search_guards(cluster_net, pair_net):
    with pytest.raises(ScenarioError):
        grid_search_p1(cluster_net)          # 9 sectors is too many
    tilts, val = grid_search_p1(pair_net, grid_step=1.0)
    lo, hi = pair_net.tilt_bounds()
    assert np.all(tilts >= lo) and np.all(tilts <= hi)
    assert np.isfinite(val)


def test_spec_validation(tmp_path):
    with pytest.raises(ScenarioError):
        ExperimentSpec(kind="optimize-P3", scenario="builtin:pair",
                       outdir=str(tmp_path)).validate()
    with pytest.raises(ScenarioError):
        ExperimentSpec(kind="optimize-P1", scenario="builtin:pair",
                       outdir=str(tmp_path), alpha=0.0).validate()


def test_baseline_run_outputs(tmp_path):
    spec = ExperimentSpec(kind="fixed-tilt-baseline",
                          scenario="builtin:pair", outdir=str(tmp_path))
    summary = run_experiment(spec)
    assert summary["status"] == "ok"
    assert (tmp_path / "summary.json").exists()
    assert (tmp_path / "rates.csv").exists()
    assert (tmp_path / "rate_cdf.png").exists()
    assert len(summary["per_user_rates"]) == 4


def test_optimize_run_outputs(tmp_path):
    spec = ExperimentSpec(kind="optimize-P1", scenario="builtin:pair",
                          outdir=str(tmp_path), alpha=0.05, iterations=300)
    summary = run_experiment(spec)
    assert summary["status"] == "ok"
    assert summary["throughput_gain_factor"] > 1.0
    assert summary["sign_assumption_violations"] == 0
    for name in ("trace.csv", "tilts.png", "rate_cdf.png", "per_user.png",
                 "summary.json"):
        assert (tmp_path / name).exists()


def test_compare_runs_requires_same_scenario(tmp_path):
    a = run_experiment(ExperimentSpec(kind="fixed-tilt-baseline",
                                      scenario="builtin:pair",
                                      outdir=str(tmp_path / "a")))
    b = run_experiment(ExperimentSpec(kind="optimize-P1",
                                      scenario="builtin:pair",
                                      outdir=str(tmp_path / "b"),
                                      iterations=200))
    c = run_experiment(ExperimentSpec(kind="fixed-tilt-baseline",
                                      scenario="builtin:smooth",
                                      outdir=str(tmp_path / "c")))
    diff = compare_runs(a, b)
    assert diff["higher_sum_rate"] == "b"
    assert len(diff["per_user_delta"]) == 4
    with pytest.raises(ScenarioError):
        compare_runs(a, c)
