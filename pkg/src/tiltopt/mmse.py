"""1x2 SIMO evaluation with LMMSE cancellation of the strongest interferer.

The serving link and the single strongest interferer get full complex
channel vectors (Rayleigh flat fading times log-normal slow fading); all
remaining interference is folded into spatially white noise of power N0.
Post-processing SINRs are averaged over fading samples and mapped to
throughputs, giving a side-by-side comparison of tilt-optimisation gains
for plain single-antenna reception versus SIMO with MMSE combining.

Slow fading enters every interference term consistently, including the
residual sum in N0, so that the strongest-interferer selection and the
power bookkeeping use the same faded powers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .radio import LinkCache

EPS_BINS = ((0.0, 0.5), (0.5, 0.8), (0.8, 1.0))


@dataclass(frozen=True)
class ChannelSample:
    """One fading realization for one user at one tilt configuration."""

    k: np.ndarray          # (2,) complex serving channel
    v: np.ndarray          # (2,) complex strongest-interferer vector
    n0: float              # residual interference + thermal noise, mW
    cmax: int              # index of the strongest interferer
    shadow_db: np.ndarray  # (B,) slow-fading draw for this user's links


def _check_equal_powers(net):
    p = np.array([s.power_mw for s in net.sectors])
    if not np.allclose(p, p[0]):
        warnings.warn("sectors transmit at unequal powers; the SIMO model "
                      "assumes a common P", stacklevel=3)
    return float(p[0])


def _faded_powers(cache, u, tilts, ref_tilts, shadow_db):
    """(serving power, per-sector faded interferer powers, noise)."""
    h_serv = cache.h_exact(tilts)[cache.serv[u], u]
    h_lin = cache.h_linearized(tilts, ref_tilts)[:, u]
    lin_fade = 10.0 ** (np.asarray(shadow_db) / 10.0)
    interf = np.where(cache.interf_mask[:, u], h_lin * lin_fade, 0.0)
    return h_serv, interf, float(cache.noise[u, 0])


def sample_channel(u, tilts, net, seed, n_samples, ref_tilts=None,
                   shadow_sigma_db=6.0, cache=None, shadow_db=None,
                   fading=None):
    """Draw fading samples for user u at the given tilt configuration.

    Slow fading is drawn once and held across all fading samples; pass
    shadow_db/fading explicitly to reuse draws across tilt configurations.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if cache is None:
        cache = LinkCache.build(net)
    if ref_tilts is None:
        ref_tilts = net.initial_tilts()
    rng = np.random.default_rng(seed)
    B = net.n_sectors
    if shadow_db is None:
        shadow_db = rng.normal(0.0, shadow_sigma_db, size=B)
    if fading is None:
        fading = (rng.normal(size=(n_samples, B, 2))
                  + 1j * rng.normal(size=(n_samples, B, 2))) / np.sqrt(2.0)
    P = _check_equal_powers(net)
    serv = int(cache.serv[u])
    h_serv, interf, eta = _faded_powers(cache, u, tilts, ref_tilts, shadow_db)
    serv_fade = 10.0 ** (shadow_db[serv] / 10.0)
    cmax = int(np.argmax(interf))
    if interf[cmax] <= 0:
        v_amp = 0.0
    else:
        v_amp = np.sqrt(interf[cmax])
    n0 = float(interf.sum() - interf[cmax] + eta)
    k_amp = np.sqrt(h_serv / P) * np.sqrt(serv_fade)
    return [ChannelSample(k=k_amp * fading[s, serv],
                          v=v_amp * fading[s, cmax],
                          n0=n0, cmax=cmax, shadow_db=np.asarray(shadow_db))
            for s in range(n_samples)]


def mmse_weights(sample, P):
    """LMMSE combining weights w = k^H (k k^H + (Phi + N0 I)/P)^(-1)."""
    return _weights(sample.k, sample.v, sample.n0, P)


def _weights(k, v, n0, P):
    k = np.asarray(k)
    v = np.asarray(v)
    k1, k2 = k[..., 0], k[..., 1]
    v1, v2 = v[..., 0], v[..., 1]
    m11 = np.abs(k1) ** 2 + (np.abs(v1) ** 2 + n0) / P
    m22 = np.abs(k2) ** 2 + (np.abs(v2) ** 2 + n0) / P
    m12 = k1 * np.conj(k2) + v1 * np.conj(v2) / P
    m21 = np.conj(m12)
    det = m11 * m22 - m12 * m21
    # w = conj(k)^T @ inv(M), 2x2 inverse in closed form
    w1 = (np.conj(k1) * m22 - np.conj(k2) * m21) / det
    w2 = (-np.conj(k1) * m12 + np.conj(k2) * m11) / det
    return np.stack([w1, w2], axis=-1)


def post_sinr(sample, w, P):
    """Post-processing SINR of the combined signal."""
    return float(_post_sinr(sample.k, sample.v, sample.n0, np.asarray(w), P))


def _post_sinr(k, v, n0, w, P):
    k1, k2 = k[..., 0], k[..., 1]
    v1, v2 = v[..., 0], v[..., 1]
    w1, w2 = w[..., 0], w[..., 1]
    phi11 = np.abs(v1) ** 2
    phi22 = np.abs(v2) ** 2
    phi12 = v1 * np.conj(v2)
    num = P * np.abs(w1 * k1 + w2 * k2) ** 2
    den = (np.abs(w1) ** 2 * phi11 + np.abs(w2) ** 2 * phi22
           + 2.0 * np.real(w1 * np.conj(w2) * phi12)
           + n0 * (np.abs(w1) ** 2 + np.abs(w2) ** 2))
    return num / den


def single_antenna_sinr(sample, P, antenna=0):
    """SINR using one receive antenna alone (no combining)."""
    k = sample.k[antenna]
    v = sample.v[antenna]
    return float(P * np.abs(k) ** 2 / (np.abs(v) ** 2 + sample.n0))


def epsilon_ratio(u, tilts, net, shadow_db, ref_tilts=None, cache=None):
    """Fraction of total interference from the single strongest interferer."""
    if cache is None:
        cache = LinkCache.build(net)
    if ref_tilts is None:
        ref_tilts = net.initial_tilts()
    _, interf, _ = _faded_powers(cache, u, tilts, ref_tilts, shadow_db)
    total = interf.sum()
    if total <= 0:
        raise ValueError("epsilon undefined without interferers")
    return float(interf.max() / total)


def epsilon_bin(eps):
    for i, (lo, hi) in enumerate(EPS_BINS):
        if (eps > lo or (i == 0 and eps >= lo)) and eps <= hi:
            return i
    raise ValueError(f"epsilon {eps} outside (0, 1]")


def _mean_sinrs_for_config(net, cache, tilts, ref_tilts, P, shadow, fading):
    """(U,) fading-averaged MMSE and single-antenna SINRs."""
    U = net.n_users
    mmse = np.empty(U)
    siso = np.empty(U)
    for u in range(U):
        serv = int(cache.serv[u])
        h_serv, interf, eta = _faded_powers(cache, u, tilts, ref_tilts,
                                            shadow[:, u])
        cmax = int(np.argmax(interf))
        n0 = float(interf.sum() - interf[cmax] + eta)
        k_amp = np.sqrt(h_serv / P) * np.sqrt(10.0 ** (shadow[serv, u] / 10.0))
        v_amp = np.sqrt(interf[cmax]) if interf[cmax] > 0 else 0.0
        k = k_amp * fading[:, serv, u, :]
        v = v_amp * fading[:, cmax, u, :]
        w = _weights(k, v, n0, P)
        mmse[u] = _post_sinr(k, v, n0, w, P).mean()
        siso[u] = (P * np.abs(k[:, 0]) ** 2
                   / (np.abs(v[:, 0]) ** 2 + n0)).mean()
    return mmse, siso


def _throughput(net, sinr):
    raw = net.bandwidth_mhz * np.log1p(net.kappa * np.asarray(sinr))
    return np.minimum(net.rate_cap, raw)


def evaluate_simo_throughput(net, theta_fixed, theta_opt, n_samples=300,
                             seed=0, shadow_sigma_db=6.0, ref_tilts=None):
    """Paired tilt-gain comparison for single-antenna and MMSE reception.

    Common shadowing and fading draws are used for both tilt
    configurations so that per-user gains are paired; epsilon ratios are
    computed at the fixed-tilt configuration.
    """
    cache = LinkCache.build(net)
    if ref_tilts is None:
        ref_tilts = net.initial_tilts()
    theta_fixed = np.asarray(theta_fixed, dtype=float)
    theta_opt = np.asarray(theta_opt, dtype=float)
    P = _check_equal_powers(net)
    rng = np.random.default_rng(seed)
    B, U = net.n_sectors, net.n_users
    shadow = rng.normal(0.0, shadow_sigma_db, size=(B, U))
    fading = (rng.normal(size=(n_samples, B, U, 2))
              + 1j * rng.normal(size=(n_samples, B, U, 2))) / np.sqrt(2.0)

    out = {}
    for label, tilts in (("fixed", theta_fixed), ("optimized", theta_opt)):
        g_mmse, g_siso = _mean_sinrs_for_config(net, cache, tilts, ref_tilts,
                                                P, shadow, fading)
        out[label] = {"simo_mmse": _throughput(net, g_mmse),
                      "siso": _throughput(net, g_siso)}

    eps = np.array([epsilon_ratio(u, theta_fixed, net, shadow[:, u],
                                  ref_tilts, cache) for u in range(U)])
    bins = np.array([epsilon_bin(e) for e in eps])

    def _gain(kind, mask):
        base = out["fixed"][kind][mask].mean()
        opt = out["optimized"][kind][mask].mean()
        return float(100.0 * (opt - base) / base)

    gains = {}
    for i, (lo, hi) in enumerate(EPS_BINS):
        mask = bins == i
        key = f"eps_{lo}_{hi}"
        gains[key] = {
            "n_users": int(mask.sum()),
            "siso_gain_pct": _gain("siso", mask) if mask.any() else None,
            "simo_gain_pct": _gain("simo_mmse", mask) if mask.any() else None,
        }
    gains["all"] = {"n_users": U,
                    "siso_gain_pct": _gain("siso", np.ones(U, dtype=bool)),
                    "simo_gain_pct": _gain("simo_mmse",
                                           np.ones(U, dtype=bool))}
    return {
        "throughput": out,
        "epsilon": eps,
        "epsilon_bin": bins,
        "gains_by_bin": gains,
        "n_samples": n_samples,
        "seed": seed,
    }
