import numpy as np
import pytest

from tiltopt.model import mbps_to_rate
from tiltopt.problems import (Multipliers, P1, P2, UtilitySpec,
                              as_saddle_problem, dtheta_interferer,
                              dtheta_serving, make_instance, solve)


def random_multipliers(rng, n_users, n_sectors, scale=0.5):
    return Multipliers(rng.uniform(0, scale, n_users),
                       rng.uniform(0, scale, n_sectors),
                       rng.uniform(0, scale, n_sectors))


def test_unknown_variant_rejected(pair_net):
    with pytest.raises(ValueError):
        make_instance(pair_net, "P3")


def test_p2_requires_positive_floor(pair_net):
    net = pair_net.with_rates(rate_floor=0.0)
    with pytest.raises(ValueError):
        make_instance(net, P2)
    make_instance(net, P1)       # P1 tolerates a zero floor


def test_multipliers_concat_split_round_trip(rng):
    lam = random_multipliers(rng, 5, 3)
    back = Multipliers.split(lam.concat(), 5, 3)
    assert np.array_equal(back.lam_rate, lam.lam_rate)
    assert np.array_equal(back.lam_lo, lam.lam_lo)
    assert np.array_equal(back.lam_hi, lam.lam_hi)
    assert lam.is_nonnegative()
    assert not Multipliers(np.array([-1.0]), np.zeros(1),
                           np.zeros(1)).is_nonnegative()


def test_utility_specs():
    lin = UtilitySpec.linear()
    log = UtilitySpec.log()
    r = np.array([0.5, 2.0])
    assert np.array_equal(lin.value(r), r)
    assert np.array_equal(lin.deriv(r), np.ones(2))
    assert np.allclose(log.value(r), np.log(r))
    assert np.allclose(log.deriv(r), 1.0 / r)
    with pytest.raises(ValueError):
        log.value(np.array([0.0]))


def test_lagrangian_is_negated_objective_plus_duals(pair_net, rng):
    for variant in (P1, P2):
        inst = make_instance(pair_net, variant)
        lam = random_multipliers(rng, pair_net.n_users, pair_net.n_sectors)
        t = rng.uniform(6.0, 18.0, pair_net.n_sectors)
        expected = (-inst.objective(t)
                    + np.dot(lam.concat(), inst.constraint_values(t)))
        assert inst.lagrangian(t, lam) == pytest.approx(expected, rel=1e-12)


def test_constraint_ordering_matches_multipliers(pair_net):
    inst = make_instance(pair_net, P1)
    t = pair_net.initial_tilts()
    g = inst.constraint_values(t)
    U, B = pair_net.n_users, pair_net.n_sectors
    assert g.shape == (U + 2 * B,)
    lo, hi = pair_net.tilt_bounds()
    assert np.allclose(g[U:U + B], lo - t)
    assert np.allclose(g[U + B:], t - hi)


def test_user_weights_zero_above_cap(cluster_net, rng):
    # cluster users sit under the mast and exceed the 10 Mbit/s cap
    inst = make_instance(cluster_net, P2)
    lam = Multipliers.zeros(cluster_net.n_users, cluster_net.n_sectors)
    t = cluster_net.initial_tilts()
    _, raw = inst.capped_rates(t)
    w = inst.user_weights(t, lam)
    assert np.all(w[raw >= cluster_net.rate_cap] == 0.0)
    assert np.all(w[raw < cluster_net.rate_cap] > 0.0)


def test_rate_gradient_interferer_signs(pair_net):
    # downtilting an interferer away from a user raises that user's rate
    inst = make_instance(pair_net, P1)
    t = pair_net.initial_tilts()
    grad = inst.rate_tilt_gradient_matrix(t + 0.5)
    c = inst.cache
    for u in range(pair_net.n_users):
        for b in range(pair_net.n_sectors):
            if b == c.serv[u]:
                continue
            # interfering sectors point above the users here, so a larger
            # tilt reduces interference and the rate derivative is positive
            assert grad[b, u] > 0.0


def test_dtheta_helpers(pair_net):
    inst1 = make_instance(pair_net, P1)
    inst2 = make_instance(pair_net, P2)
    t = pair_net.initial_tilts()
    assert np.isfinite(dtheta_serving(inst1, 0, t))
    with pytest.raises(ValueError):
        dtheta_serving(inst2, 0, t)
    b_serv = int(inst1.cache.serv[0])
    with pytest.raises(ValueError):
        dtheta_interferer(inst1, 0, b_serv, t)
    other = 1 - b_serv
    assert dtheta_interferer(inst1, 0, other, t) == pytest.approx(
        inst1.rate_tilt_gradient_matrix(t)[other, 0])


def test_full_subgradients_shapes_and_duals(pair_net, rng):
    inst = make_instance(pair_net, P2)
    lam = random_multipliers(rng, pair_net.n_users, pair_net.n_sectors)
    t = rng.uniform(6.0, 18.0, pair_net.n_sectors)
    d_theta, d_lam = inst.full_subgradients(t, lam)
    assert d_theta.shape == (pair_net.n_sectors,)
    # the dual subgradient is exactly the constraint vector
    assert np.allclose(d_lam.concat(), inst.constraint_values(t))


def test_feasibility_check_flags_floor_violation(pair_net):
    net = pair_net.with_rates(rate_floor=mbps_to_rate(150.0))
    inst = make_instance(net, P1)
    report = inst.feasibility_check(net.initial_tilts())
    assert len(report["min_rate_violations"]) == net.n_users
    assert not report["feasible_at_point"]


def test_feasibility_check_flags_bound_violation(pair_net):
    inst = make_instance(pair_net, P1)
    report = inst.feasibility_check(np.array([25.0, 8.0]))
    assert report["bound_violations"][0]["sector"] == 0
    assert not report["feasible_at_point"]


def test_feasibility_check_clean_point(pair_net):
    inst = make_instance(pair_net, P1)
    report = inst.feasibility_check(pair_net.initial_tilts())
    assert report["feasible_at_point"]
    assert not report["suspected_infeasible"]


def test_saddle_adapter_consistency(pair_net, rng):
    inst = make_instance(pair_net, P1)
    prob = as_saddle_problem(inst)
    assert prob.n == pair_net.n_sectors
    assert prob.m == pair_net.n_users + 2 * pair_net.n_sectors
    t = rng.uniform(6.0, 18.0, pair_net.n_sectors)
    lam = random_multipliers(rng, pair_net.n_users, pair_net.n_sectors)
    assert prob.lagrangian(t, lam.concat()) == pytest.approx(
        inst.lagrangian(t, lam), rel=1e-12)


def test_solve_keeps_duals_nonnegative(pair_net):
    inst = make_instance(pair_net, P1)
    trace = solve(inst, alpha=0.05, T=50)
    assert len(trace) == 51
    assert all(np.all(u >= 0) for u in trace.u)
    lo, hi = pair_net.tilt_bounds()
    # tilts stay in (a small margin around) the box via the multipliers
    assert np.all(trace.final_x > lo - 1.0)
    assert np.all(trace.final_x < hi + 1.0)
