"""Objectives, constraints, Lagrangians and analytic subgradients.

Two problem variants are supported:

* ``P1``: maximise a concave increasing utility of the high-SINR throughput
  approximation, subject to tilt bounds and per-user minimum rates.
* ``P2``: proportional fair allocation, i.e. maximise the sum of log
  throughputs (valid in any SINR regime), with the minimum-rate constraint
  expressed in the log domain.

All tilt gradients are derived by the chain rule from the physical-layer
primitives and validated against central finite differences in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Network
from .radio import LinkCache

P1 = "P1-highSINR"
P2 = "P2-propFair"


@dataclass
class Multipliers:
    """Dual variables: one per min-rate constraint and per tilt bound."""

    lam_rate: np.ndarray     # (U,) minimum-rate multipliers
    lam_lo: np.ndarray       # (B,) lower tilt bound multipliers
    lam_hi: np.ndarray       # (B,) upper tilt bound multipliers

    @classmethod
    def zeros(cls, n_users, n_sectors):
        return cls(np.zeros(n_users), np.zeros(n_sectors), np.zeros(n_sectors))

    def concat(self):
        return np.concatenate([self.lam_rate, self.lam_lo, self.lam_hi])

    @classmethod
    def split(cls, vec, n_users, n_sectors):
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:n_users].copy(),
                   vec[n_users:n_users + n_sectors].copy(),
                   vec[n_users + n_sectors:].copy())

    def is_nonnegative(self):
        return (self.lam_rate >= 0).all() and (self.lam_lo >= 0).all() \
            and (self.lam_hi >= 0).all()


@dataclass(frozen=True)
class UtilitySpec:
    """Concave increasing utility; value and derivative callables."""

    kind: str
    value: callable
    deriv: callable

    @classmethod
    def linear(cls):
        return cls("linear", lambda r: np.asarray(r, dtype=float),
                   lambda r: np.ones_like(np.asarray(r, dtype=float)))

    @classmethod
    def log(cls):
        def _val(r):
            r = np.asarray(r, dtype=float)
            if np.any(r <= 0):
                raise ValueError("log utility needs positive rates")
            return np.log(r)

        def _der(r):
            r = np.asarray(r, dtype=float)
            if np.any(r <= 0):
                raise ValueError("log utility needs positive rates")
            return 1.0 / r

        return cls("log", _val, _der)


@dataclass
class ProblemInstance:
    variant: str
    net: Network
    ref_tilts: np.ndarray                 # linearization point, per sector
    utility: UtilitySpec = None           # P1 only
    cache: LinkCache = None
    use_reported_geometry: bool = False   # gradients from reported positions

    def __post_init__(self):
        if self.variant not in (P1, P2):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == P1 and self.utility is None:
            self.utility = UtilitySpec.linear()
        if self.variant == P2 and self.net.rate_floor <= 0:
            raise ValueError("P2 needs a strictly positive rate floor")
        if self.cache is None:
            self.cache = LinkCache.build(self.net)
        self.ref_tilts = np.asarray(self.ref_tilts, dtype=float)

    # -- objective pieces ---------------------------------------------------

    def capped_rates(self, tilts):
        """(R_hat or R depending on variant, uncapped value) pair."""
        c = self.cache
        raw = (c.rates_high_sinr(tilts, self.ref_tilts) if self.variant == P1
               else c.rates(tilts, self.ref_tilts))
        return np.minimum(self.net.rate_cap, raw), raw

    def objective(self, tilts):
        """The maximisation objective (sum utility / sum log rate)."""
        capped, _ = self.capped_rates(tilts)
        if self.variant == P1:
            return float(self.utility.value(capped).sum())
        return float(np.log(capped).sum())

    def constraint_values(self, tilts):
        """All constraints as g(theta) <= 0, concatenated like Multipliers."""
        capped, _ = self.capped_rates(tilts)
        lo, hi = self.net.tilt_bounds()
        tilts = np.asarray(tilts, dtype=float)
        if self.variant == P1:
            g_rate = self.net.rate_floor - capped
        else:
            g_rate = math.log(self.net.rate_floor) - np.log(capped)
        return np.concatenate([g_rate, lo - tilts, tilts - hi])

    # -- Lagrangian and subgradients ---------------------------------------

    def lagrangian(self, tilts, lam):
        capped, _ = self.capped_rates(tilts)
        lo, hi = self.net.tilt_bounds()
        tilts = np.asarray(tilts, dtype=float)
        if self.variant == P1:
            obj = self.utility.value(capped).sum()
            g_rate = self.net.rate_floor - capped
        else:
            obj = np.log(capped).sum()
            g_rate = math.log(self.net.rate_floor) - np.log(capped)
        return float(-obj
                     + np.dot(lam.lam_rate, g_rate)
                     + np.dot(lam.lam_lo, lo - tilts)
                     + np.dot(lam.lam_hi, tilts - hi))

    def rate_tilt_gradient_matrix(self, tilts):
        """(B, U) matrix of d(rate_u)/d(tilt_b).

        For P1 the rate is the high-SINR approximation; for P2 the exact
        one.  Entries for capped users are NOT zeroed here; the cap kink is
        applied by the caller.
        """
        c = self.cache
        net = self.net
        tilts = np.asarray(tilts, dtype=float)
        B, U = net.n_sectors, net.n_users
        rep = self.use_reported_geometry

        h_lin = c.h_linearized(tilts, self.ref_tilts)
        denom = np.where(c.interf_mask, h_lin, 0.0).sum(axis=0)[:, None] \
            + c.noise                                     # (U, Nsc)
        w_per = net.bandwidth_mhz / net.n_subcarriers

        if self.variant == P1:
            t_fac = np.ones_like(denom)
        else:
            h_serv = c.h_exact(tilts)[c.serv, np.arange(U)]
            kg = net.kappa * h_serv[:, None] / denom
            t_fac = kg / (1.0 + kg)

        # interferer columns: -(w/Nsc) * sum_n t_n / D_n * H_lin * slope
        a_fac = (t_fac / denom).sum(axis=1)               # (U,)
        slopes = c.lin_slopes(self.ref_tilts, reported=rep)
        grad = -w_per * h_lin * a_fac[None, :] * slopes
        grad[~c.interf_mask] = 0.0

        # serving entries: (w/Nsc) * sum_n t_n * serving slope
        s_serv = c.serving_slopes(tilts, reported=rep)
        grad[c.serv, np.arange(U)] = w_per * t_fac.sum(axis=1) * s_serv
        return grad

    def user_weights(self, tilts, lam):
        """(U,) per-user factors multiplying the rate gradients.

        Zero for users at or above the rate cap (valid subgradient at the
        min-kink); otherwise (1 + lam_rate) times the utility derivative
        (P1) or divided by the rate (P2).
        """
        capped, raw = self.capped_rates(tilts)
        active = raw < self.net.rate_cap
        if self.variant == P1:
            w = (1.0 + lam.lam_rate) * self.utility.deriv(capped)
        else:
            w = (1.0 + lam.lam_rate) / capped
        return np.where(active, w, 0.0)

    def full_subgradients(self, tilts, lam):
        """(d_theta L, d_lambda L as Multipliers)."""
        tilts = np.asarray(tilts, dtype=float)
        grad_r = self.rate_tilt_gradient_matrix(tilts)
        weights = self.user_weights(tilts, lam)
        d_theta = -(grad_r * weights[None, :]).sum(axis=1) \
            - lam.lam_lo + lam.lam_hi

        capped, _ = self.capped_rates(tilts)
        lo, hi = self.net.tilt_bounds()
        if self.variant == P1:
            d_rate = self.net.rate_floor - capped
        else:
            d_rate = math.log(self.net.rate_floor) - np.log(capped)
        return d_theta, Multipliers(d_rate, lo - tilts, tilts - hi)

    # -- diagnostics --------------------------------------------------------

    def feasibility_check(self, tilts, trace=None, lam_growth_tol=1.0):
        """Report violated constraints and a dual-growth infeasibility hint."""
        tilts = np.asarray(tilts, dtype=float)
        capped, _ = self.capped_rates(tilts)
        lo, hi = self.net.tilt_bounds()
        report = {
            "min_rate_violations": [
                {"user": int(u.id), "rate": float(capped[i]),
                 "floor": float(self.net.rate_floor)}
                for i, u in enumerate(self.net.users)
                if capped[i] < self.net.rate_floor - 1e-12],
            "bound_violations": [
                {"sector": int(s.id), "tilt": float(tilts[i]),
                 "bounds": [float(lo[i]), float(hi[i])]}
                for i, s in enumerate(self.net.sectors)
                if tilts[i] < lo[i] - 1e-12 or tilts[i] > hi[i] + 1e-12],
            "suspected_infeasible": False,
        }
        if trace is not None and len(trace.u) > 20:
            # heuristic: min-rate multipliers still climbing at the end
            u = np.asarray(trace.u)
            lam_rate = u[:, : self.net.n_users]
            tail = lam_rate[-len(lam_rate) // 10:, :]
            growth = tail[-1] - tail[0]
            big = lam_rate[-1] > 10.0 * (np.abs(lam_rate).mean() + 1e-12)
            report["suspected_infeasible"] = bool(
                np.any((growth > lam_growth_tol) & big))
        report["feasible_at_point"] = not (report["min_rate_violations"]
                                           or report["bound_violations"])
        return report


def as_saddle_problem(inst):
    """Adapter binding the instance to the generic primal-dual engine.

    The primal variable is the tilt vector; the dual vector is the
    concatenation [lam_rate, lam_lo, lam_hi].
    """
    from .saddle import SaddleProblem

    U, B = inst.net.n_users, inst.net.n_sectors

    def _f(x):
        return -inst.objective(x)

    def _g(x):
        return inst.constraint_values(x)

    def _subgrad_x(x, u):
        lam = Multipliers.split(u, U, B)
        d_theta, _ = inst.full_subgradients(x, lam)
        return d_theta

    return SaddleProblem(n=B, m=U + 2 * B, f=_f, g=_g, subgrad_x=_subgrad_x)


def solve(inst, alpha, T, theta0=None, lam0=None, stop="fixed-T",
          change_tol=1e-4):
    """Run the primal-dual engine on this instance; returns the trace."""
    from . import saddle

    if theta0 is None:
        theta0 = inst.net.initial_tilts()
    if lam0 is None:
        lam0 = Multipliers.zeros(inst.net.n_users, inst.net.n_sectors)
    return saddle.run(as_saddle_problem(inst), theta0, lam0.concat(),
                      alpha=alpha, T=T, stop=stop, change_tol=change_tol)


# ---------------------------------------------------------------------------
# scalar sensitivity operations (single-user surface)

def dtheta_serving(inst, user_idx, tilts):
    """d(high-SINR rate of user)/d(serving tilt) via the chain rule."""
    c = inst.cache
    net = inst.net
    s = c.serving_slopes(tilts, reported=inst.use_reported_geometry)[user_idx]
    if inst.variant == P1:
        return float(net.bandwidth_mhz * s)
    raise ValueError("serving sensitivity in closed form is the P1 surface; "
                     "use rate_tilt_gradient_matrix for P2")


def dtheta_interferer(inst, user_idx, sector_idx, tilts):
    """d(rate of user)/d(tilt of a non-serving sector)."""
    if sector_idx == inst.cache.serv[user_idx]:
        raise ValueError("sector serves this user")
    return float(inst.rate_tilt_gradient_matrix(tilts)[sector_idx, user_idx])


def make_instance(net, variant, utility=None, ref_tilts=None,
                  use_reported_geometry=False):
    if ref_tilts is None:
        ref_tilts = net.initial_tilts()
    return ProblemInstance(variant=variant, net=net,
                           ref_tilts=np.asarray(ref_tilts, dtype=float),
                           utility=utility,
                           use_reported_geometry=use_reported_geometry)
