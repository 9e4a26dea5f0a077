import math

import numpy as np
import pytest

from tiltopt.model import ScenarioError
from tiltopt.radio import (LinkCache, attenuation_coeff, exact_gain_slope,
                           linearized_gain_exponent, linearized_gain_slope,
                           path_loss, rate, rate_high_sinr,
                           received_power_exact, received_power_linearized,
                           sinr, vertical_attenuation)


def test_vertical_attenuation_boresight_is_unity():
    assert vertical_attenuation(8.0, 8.0, 10.0) == pytest.approx(1.0)


def test_vertical_attenuation_range_and_symmetry():
    g1 = vertical_attenuation(8.0, 12.0, 10.0)
    g2 = vertical_attenuation(8.0, 4.0, 10.0)
    assert 0.0 < g1 <= 1.0
    assert g1 == pytest.approx(g2)


def test_vertical_attenuation_half_power_at_half_beamwidth():
    # 3 dB down when the offset equals half the 3 dB beamwidth
    g = vertical_attenuation(8.0, 8.0 + 5.0, 10.0)
    assert 10.0 * math.log10(g) == pytest.approx(-3.0)


def test_vertical_attenuation_rejects_bad_beamwidth():
    with pytest.raises(ScenarioError):
        vertical_attenuation(8.0, 8.0, 0.0)


def test_attenuation_coeff_value():
    assert attenuation_coeff(10.0) == pytest.approx(1.2 * math.log(10) / 100)


def test_tangent_matches_exact_at_reference():
    # value and slope of the tangent model agree with the exact log-gain
    # at the linearization point
    tilt, point, bw = 8.0, 13.0, 10.0
    exact = math.log(vertical_attenuation(tilt, point, bw))
    lin = linearized_gain_exponent(tilt, point, tilt, bw)
    assert lin == pytest.approx(exact, rel=1e-12)
    assert linearized_gain_slope(point, tilt, bw) == pytest.approx(
        exact_gain_slope(tilt, point, bw))


def test_tangent_overestimates_away_from_reference():
    # a tangent to a concave function lies above it
    point, ref, bw = 13.0, 8.0, 10.0
    for tilt in (5.0, 10.0, 17.0):
        lin = linearized_gain_exponent(tilt, point, ref, bw)
        exact = math.log(vertical_attenuation(tilt, point, bw))
        assert lin >= exact - 1e-12


def test_path_loss_monotone_and_guarded():
    assert path_loss(0.1, 0.0316, 3.76) > path_loss(0.2, 0.0316, 3.76)
    with pytest.raises(ScenarioError):
        path_loss(0.0, 0.0316, 3.76)


def test_cache_matches_scalar_powers(pair_net):
    cache = LinkCache.build(pair_net)
    tilts = np.array([9.0, 7.0])
    ref = pair_net.initial_tilts()
    h = cache.h_exact(tilts)
    hl = cache.h_linearized(tilts, ref)
    for b, s in enumerate(pair_net.sectors):
        for u, ue in enumerate(pair_net.users):
            assert h[b, u] == pytest.approx(
                received_power_exact(s, ue, tilts[b], pair_net), rel=1e-12)
            assert hl[b, u] == pytest.approx(
                received_power_linearized(s, ue, tilts[b], ref[b], pair_net),
                rel=1e-12)


def test_cache_slopes_match_scalar_forms(pair_net):
    cache = LinkCache.build(pair_net)
    ref = pair_net.initial_tilts()
    tilts = np.array([9.0, 7.0])
    slopes = cache.lin_slopes(ref)
    for b, s in enumerate(pair_net.sectors):
        for u in range(pair_net.n_users):
            assert slopes[b, u] == pytest.approx(linearized_gain_slope(
                cache.point[b, u], ref[b], s.beamwidth_deg))
    serving = cache.serving_slopes(tilts)
    for u in range(pair_net.n_users):
        b = cache.serv[u]
        assert serving[u] == pytest.approx(exact_gain_slope(
            tilts[b], cache.point[b, u],
            pair_net.sectors[b].beamwidth_deg))


def test_sinr_positive_and_finite(cluster_net):
    cache = LinkCache.build(cluster_net)
    t = cluster_net.initial_tilts()
    g = cache.sinr(t, t)
    assert g.shape == (cluster_net.n_users, cluster_net.n_subcarriers)
    assert np.all(g > 0) and np.all(np.isfinite(g))


def test_high_sinr_rate_bounds_exact_rate(cluster_net):
    # ln(x) <= ln(1+x), so the high-SINR form never exceeds the exact rate
    cache = LinkCache.build(cluster_net)
    t = cluster_net.initial_tilts()
    assert np.all(cache.rates_high_sinr(t, t) <= cache.rates(t, t))


def test_capped_rates(cluster_net):
    cache = LinkCache.build(cluster_net)
    t = cluster_net.initial_tilts()
    r = cache.capped(cache.rates(t, t))
    assert np.all(r <= cluster_net.rate_cap + 1e-12)


def test_scalar_rate_wrappers(pair_net):
    t = pair_net.initial_tilts()
    raw, capped = rate(0, t, pair_net, t)
    assert capped == min(pair_net.rate_cap, raw)
    raw_h, capped_h = rate_high_sinr(0, t, pair_net, t)
    assert raw_h <= raw
    g = sinr(0, 0, t, pair_net, t)
    assert g > 0


def test_sign_violations_zero_at_reference(cluster_net):
    cache = LinkCache.build(cluster_net)
    assert cache.sign_violations(cluster_net.initial_tilts()) == 0


def test_sign_violations_detects_crossing(pair_net):
    cache = LinkCache.build(pair_net)
    # tilt far past every pointing angle so (point - tilt) flips sign on
    # links that pointed below the initial tilt
    flipped = cache.sign_violations(np.array([20.0, 20.0]))
    point = cache.point
    expect = int(np.count_nonzero(((point - 20.0) * (point - 8.0) < 0)
                                  & cache.interf_mask))
    assert flipped == expect
