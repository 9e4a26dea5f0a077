"""Antenna gain, path loss, received power, SINR and throughput.

Scalar operations mirror the physical-layer formulas one to one; the
:class:`LinkCache` precomputes every tilt-independent per-link constant so
that whole-network evaluation is a handful of vectorised array operations.

The serving link always uses the exact Gaussian-main-lobe gain; interfering
links use its first-order (tangent) approximation around a frozen reference
tilt, which makes the log of the total interference a convex function of the
tilt vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Network, ScenarioError, distance, pointing_angle

LN10 = math.log(10.0)


# ---------------------------------------------------------------------------
# scalar physical-layer primitives

def attenuation_coeff(beamwidth_deg):
    """Quadratic coefficient of the log-gain: 1.2 ln(10) / beamwidth^2."""
    return 1.2 * LN10 / beamwidth_deg ** 2


def vertical_attenuation(tilt_deg, point_deg, beamwidth_deg):
    """Main-lobe vertical gain factor in (0, 1]; 1 exactly on boresight."""
    if beamwidth_deg <= 0:
        raise ScenarioError("beamwidth must be positive")
    return 10.0 ** (-1.2 * ((point_deg - tilt_deg) / beamwidth_deg) ** 2)


def linearized_gain_exponent(tilt_deg, point_deg, ref_tilt_deg, beamwidth_deg):
    """Tangent approximation (natural log) of the vertical gain exponent.

    First-order expansion of ln(vertical_attenuation) around the reference
    tilt: affine in the tilt, matching value and slope at the reference
    point, with slope (2.4 ln10 / beamwidth^2) (point - ref).
    """
    if beamwidth_deg <= 0:
        raise ScenarioError("beamwidth must be positive")
    a = attenuation_coeff(beamwidth_deg)
    off = point_deg - ref_tilt_deg
    return -a * (off * off - 2.0 * off * (tilt_deg - ref_tilt_deg))


def linearized_gain_slope(point_deg, ref_tilt_deg, beamwidth_deg):
    """d/d(tilt) of :func:`linearized_gain_exponent` (constant in tilt)."""
    return 2.0 * attenuation_coeff(beamwidth_deg) * (point_deg - ref_tilt_deg)


def exact_gain_slope(tilt_deg, point_deg, beamwidth_deg):
    """d/d(tilt) of ln(vertical_attenuation)."""
    return 2.0 * attenuation_coeff(beamwidth_deg) * (point_deg - tilt_deg)


def path_loss(d_km, rho0, beta):
    """Distance-power-law propagation factor rho0 * d^(-beta)."""
    if d_km <= 0:
        raise ScenarioError("degenerate geometry: non-positive distance")
    return rho0 * d_km ** (-beta)


def _link_constant(sector, user, net):
    """Tilt-independent received-power factor G0 * horiz * shadow * rho * P."""
    d = distance(sector, user)
    rho0, beta = net.rho0, net.beta
    if net.los_mask is not None:
        b = net.sector_index(sector.id)
        uidx = [uu.id for uu in net.users].index(user.id)
        if net.los_mask[b, uidx]:
            rho0, beta = net.los_rho0, net.los_beta
    rho = path_loss(d, rho0, beta)
    bearing = math.degrees(math.atan2(user.y_km - sector.y_km,
                                      user.x_km - sector.x_km))
    horiz = float(net.horizontal.gain(bearing - sector.azimuth_deg))
    shadow = 1.0
    if net.shadow_db is not None:
        b = net.sector_index(sector.id)
        uidx = [uu.id for uu in net.users].index(user.id)
        shadow = 10.0 ** (net.shadow_db[b, uidx] / 10.0)
    return sector.max_gain * horiz * shadow * rho * sector.power_mw


def received_power_exact(sector, user, tilt_deg, net):
    """Received power (mW) through the exact vertical gain."""
    point = pointing_angle(sector, user, net)
    gv = vertical_attenuation(tilt_deg, point, sector.beamwidth_deg)
    return _link_constant(sector, user, net) * gv


def received_power_linearized(sector, user, tilt_deg, ref_tilt_deg, net):
    """Received power (mW) through the tangent-approximated gain."""
    point = pointing_angle(sector, user, net)
    g = linearized_gain_exponent(tilt_deg, point, ref_tilt_deg,
                                 sector.beamwidth_deg)
    return _link_constant(sector, user, net) * math.exp(g)


# ---------------------------------------------------------------------------
# vectorised network evaluation

@dataclass
class LinkCache:
    """Per-link constants for a fixed Network (tilt-independent)."""

    net: Network
    const: np.ndarray        # (B, U) link constant, mW
    point: np.ndarray        # (B, U) true pointing angles, deg
    point_rep: np.ndarray    # (B, U) pointing angles from reported positions
    a: np.ndarray            # (B,) quadratic gain coefficients
    power: np.ndarray        # (B,) transmit power, mW
    serv: np.ndarray         # (U,) serving sector index per user
    noise: np.ndarray        # (U, Nsc) per-sub-carrier noise power
    interf_mask: np.ndarray  # (B, U) True where b is an interferer of u

    @classmethod
    def build(cls, net):
        B, U = net.n_sectors, net.n_users
        sx = np.array([s.x_km for s in net.sectors])
        sy = np.array([s.y_km for s in net.sectors])
        ux = np.array([u.x_km for u in net.users])
        uy = np.array([u.y_km for u in net.users])
        rx = np.array([u.reported_x_km for u in net.users])
        ry = np.array([u.reported_y_km for u in net.users])

        dx = ux[None, :] - sx[:, None]
        dy = uy[None, :] - sy[:, None]
        d = np.hypot(dx, dy)
        if np.any(d <= 0):
            raise ScenarioError("degenerate geometry: co-located sector/user")
        h_km = net.height_m / 1000.0
        point = np.degrees(np.arctan(h_km / d))
        d_rep = np.hypot(rx[None, :] - sx[:, None], ry[None, :] - sy[:, None])
        d_rep = np.maximum(d_rep, 1e-6)
        point_rep = np.degrees(np.arctan(h_km / d_rep))

        rho0 = np.full((B, U), net.rho0)
        beta = np.full((B, U), net.beta)
        if net.los_mask is not None:
            rho0 = np.where(net.los_mask, net.los_rho0, rho0)
            beta = np.where(net.los_mask, net.los_beta, beta)
        rho = rho0 * d ** (-beta)

        bearing = np.degrees(np.arctan2(dy, dx))
        az = np.array([s.azimuth_deg for s in net.sectors])
        horiz = net.horizontal.gain(bearing - az[:, None])

        shadow = np.ones((B, U))
        if net.shadow_db is not None:
            shadow = 10.0 ** (np.asarray(net.shadow_db) / 10.0)

        g0 = np.array([s.max_gain for s in net.sectors])
        power = np.array([s.power_mw for s in net.sectors])
        const = g0[:, None] * horiz * shadow * rho * power[:, None]

        a = np.array([attenuation_coeff(s.beamwidth_deg) for s in net.sectors])
        serv = net.serving_indices()
        noise = np.tile(np.array([u.noise_mw for u in net.users])[:, None],
                        (1, net.n_subcarriers))
        interf = np.ones((B, U), dtype=bool)
        interf[serv, np.arange(U)] = False
        return cls(net=net, const=const, point=point, point_rep=point_rep,
                   a=a, power=power, serv=serv, noise=noise,
                   interf_mask=interf)

    # -- received powers ----------------------------------------------------

    def h_exact(self, tilts):
        """(B, U) exact received powers at the given tilt vector."""
        delta = self.point - np.asarray(tilts, dtype=float)[:, None]
        return self.const * np.exp(-self.a[:, None] * delta * delta)

    def h_linearized(self, tilts, ref_tilts):
        """(B, U) tangent-approximated received powers."""
        tilts = np.asarray(tilts, dtype=float)
        ref = np.asarray(ref_tilts, dtype=float)
        off = self.point - ref[:, None]
        expo = -self.a[:, None] * (off * off
                                   - 2.0 * off * (tilts - ref)[:, None])
        return self.const * np.exp(expo)

    def lin_slopes(self, ref_tilts, reported=False):
        """(B, U) tilt-derivative of the linearized gain exponent."""
        point = self.point_rep if reported else self.point
        ref = np.asarray(ref_tilts, dtype=float)
        return 2.0 * self.a[:, None] * (point - ref[:, None])

    def serving_slopes(self, tilts, reported=False):
        """(U,) tilt-derivative of the serving log-gain, per user."""
        point = self.point_rep if reported else self.point
        U = len(self.serv)
        p = point[self.serv, np.arange(U)]
        return 2.0 * self.a[self.serv] * (p - np.asarray(tilts)[self.serv])

    # -- SINR and rates ------------------------------------------------------

    def interference(self, tilts, ref_tilts):
        """(U, Nsc) total linearized interference plus noise."""
        h_lin = self.h_linearized(tilts, ref_tilts)
        total = np.where(self.interf_mask, h_lin, 0.0).sum(axis=0)
        return total[:, None] + self.noise

    def sinr(self, tilts, ref_tilts):
        """(U, Nsc) downlink SINR; exact serving power over linearized
        interference plus noise."""
        U = len(self.serv)
        h_serv = self.h_exact(tilts)[self.serv, np.arange(U)]
        return h_serv[:, None] / self.interference(tilts, ref_tilts)

    def rates(self, tilts, ref_tilts):
        """(U,) Shannon-style throughputs, uncapped (mega-nat/s)."""
        net = self.net
        g = self.sinr(tilts, ref_tilts)
        return (net.bandwidth_mhz / net.n_subcarriers) * np.log1p(
            net.kappa * g).sum(axis=1)

    def rates_high_sinr(self, tilts, ref_tilts):
        """(U,) high-SINR approximate throughputs, uncapped."""
        net = self.net
        g = self.sinr(tilts, ref_tilts)
        with np.errstate(divide="ignore"):
            # log(0) -> -inf on blown-up trajectories; the engine treats a
            # non-finite evaluation as divergence.
            return (net.bandwidth_mhz / net.n_subcarriers) * np.log(
                net.kappa * g).sum(axis=1)

    def capped(self, r):
        return np.minimum(self.net.rate_cap, r)

    def sign_violations(self, tilts):
        """Count interfering links where (point - tilt) changed sign relative
        to the linearization reference; the tangent model assumes it does not.
        """
        tilts = np.asarray(tilts, dtype=float)
        ref = self.net.initial_tilt_deg
        cur = self.point - tilts[:, None]
        ref_side = self.point - ref
        return int(np.count_nonzero((cur * ref_side < 0) & self.interf_mask))


# ---------------------------------------------------------------------------
# scalar wrappers for single-link checks and small experiments

def _cache_for(net, _cache={}):
    key = id(net)
    if key not in _cache or _cache[key][0] is not net:
        _cache.clear()
        _cache[key] = (net, LinkCache.build(net))
    return _cache[key][1]


def sinr(user_idx, subcarrier, tilts, net, ref_tilts):
    return float(_cache_for(net).sinr(tilts, ref_tilts)[user_idx, subcarrier])


def rate(user_idx, tilts, net, ref_tilts):
    """(uncapped, capped) throughput for one user."""
    c = _cache_for(net)
    r = float(c.rates(tilts, ref_tilts)[user_idx])
    return r, min(net.rate_cap, r)


def rate_high_sinr(user_idx, tilts, net, ref_tilts):
    c = _cache_for(net)
    r = float(c.rates_high_sinr(tilts, ref_tilts)[user_idx])
    return r, min(net.rate_cap, r)
