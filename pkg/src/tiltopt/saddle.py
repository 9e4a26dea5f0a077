"""Generic primal-dual subgradient engine with convergence diagnostics.

Solves min_x f(x) s.t. g_i(x) <= 0 by the simultaneous (Jacobi) update

    x(t+1) = x(t) - alpha * d_x L(x(t), u(t))
    u(t+1) = [u(t) + alpha * g(x(t))]^+

with L(x, u) = f(x) + sum_i u_i g_i(x) and constant step size alpha.  The
trace records, per step, the Lagrangian, every constraint value, and the
stationarity measure eps(x, u) = sum (d_x L)^2 + sum g_i^2 used by the
averaged duality-gap certificate.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SaddleProblem:
    """Oracle bundle: pure, deterministic callables for f, g and d_x L."""

    n: int                 # primal dimension
    m: int                 # constraint count
    f: callable            # x -> scalar
    g: callable            # x -> (m,) constraint values, feasible iff <= 0
    subgrad_x: callable    # (x, u) -> (n,) subgradient of L in x

    def lagrangian(self, x, u):
        return float(self.f(x) + np.dot(u, self.g(x)))

    def epsilon(self, x, u):
        gx = self.g(x)
        dx = self.subgrad_x(x, u)
        return float(np.dot(dx, dx) + np.dot(gx, gx))


@dataclass
class SaddleState:
    t: int
    x: np.ndarray
    u: np.ndarray
    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("step size must be positive")
        if np.any(self.u < 0):
            raise ValueError("dual variables must be nonnegative")


@dataclass
class IterationTrace:
    """Append-only per-iteration record; length = iterations + 1."""

    x: list = field(default_factory=list)
    u: list = field(default_factory=list)
    lagrangian: list = field(default_factory=list)
    g: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    alpha: float = 0.0
    diverged: bool = False
    stop_reason: str = ""

    def append(self, problem, x, u):
        self.x.append(np.array(x, dtype=float))
        self.u.append(np.array(u, dtype=float))
        self.lagrangian.append(problem.lagrangian(x, u))
        self.g.append(np.asarray(problem.g(x), dtype=float))
        self.eps.append(problem.epsilon(x, u))

    def __len__(self):
        return len(self.x)

    @property
    def final_x(self):
        return self.x[-1]

    @property
    def final_u(self):
        return self.u[-1]

    def tail_average_x(self, fraction=0.1):
        k = max(1, int(len(self.x) * fraction))
        return np.mean(np.asarray(self.x[-k:]), axis=0)

    def max_step_change(self, last=1):
        """Largest |x(t+1)-x(t)| entry over the final `last` transitions."""
        if len(self.x) < 2:
            return 0.0
        xs = np.asarray(self.x[-(last + 1):])
        return float(np.abs(np.diff(xs, axis=0)).max())

    def to_csv(self, path):
        """Columns, in order: t, x..., u..., L, g..., eps."""
        n = len(self.x[0])
        m = len(self.u[0])
        header = (["t"] + [f"x{i}" for i in range(n)]
                  + [f"u{i}" for i in range(m)] + ["L"]
                  + [f"g{i}" for i in range(m)] + ["eps"])
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for t in range(len(self.x)):
                wr.writerow([t] + [repr(float(v)) for v in self.x[t]]
                            + [repr(float(v)) for v in self.u[t]]
                            + [repr(float(self.lagrangian[t]))]
                            + [repr(float(v)) for v in self.g[t]]
                            + [repr(float(self.eps[t]))])

    def summary(self):
        return {
            "iterations": len(self.x) - 1,
            "alpha": self.alpha,
            "diverged": self.diverged,
            "stop_reason": self.stop_reason,
            "final_x": [float(v) for v in self.x[-1]],
            "final_u": [float(v) for v in self.u[-1]],
            "final_lagrangian": self.lagrangian[-1],
            "final_eps": self.eps[-1],
            "max_final_step_change": self.max_step_change(),
        }

    def save_summary(self, path, extra=None):
        data = self.summary()
        if extra:
            data.update(extra)
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2)


def step(problem, state):
    """One simultaneous primal-dual update from the pre-step point."""
    dx = np.asarray(problem.subgrad_x(state.x, state.u), dtype=float)
    gx = np.asarray(problem.g(state.x), dtype=float)
    if not np.all(np.isfinite(dx)):
        bad = np.flatnonzero(~np.isfinite(dx))
        raise FloatingPointError(
            f"non-finite primal subgradient in components {bad.tolist()}")
    if not np.all(np.isfinite(gx)):
        bad = np.flatnonzero(~np.isfinite(gx))
        raise FloatingPointError(
            f"non-finite constraint value in components {bad.tolist()}")
    x_new = state.x - state.alpha * dx
    u_new = np.maximum(0.0, state.u + state.alpha * gx)
    return SaddleState(t=state.t + 1, x=x_new, u=u_new, alpha=state.alpha)


def run(problem, x0, u0, alpha, T, stop="fixed-T", change_tol=1e-4,
        divergence_factor=1e6):
    """Iterate up to T steps; returns the full IterationTrace.

    stop="fixed-T" always runs T steps; stop="gap-threshold" additionally
    halts once the largest successive primal change drops below change_tol
    (the iterate-stability reading of convergence used throughout).
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if stop not in ("fixed-T", "gap-threshold"):
        raise ValueError(f"unknown stop rule {stop!r}")
    state = SaddleState(t=0, x=np.array(x0, dtype=float),
                        u=np.array(u0, dtype=float), alpha=alpha)
    trace = IterationTrace(alpha=alpha)
    trace.append(problem, state.x, state.u)
    ceiling = divergence_factor * max(
        1.0, float(np.linalg.norm(state.x)), float(np.linalg.norm(state.u)))
    for _ in range(T):
        prev_x = state.x
        try:
            state = step(problem, state)
            trace.append(problem, state.x, state.u)
        except FloatingPointError as exc:
            trace.diverged = True
            trace.stop_reason = f"non-finite evaluation: {exc}"
            return trace
        if (np.linalg.norm(state.x) > ceiling
                or np.linalg.norm(state.u) > ceiling):
            trace.diverged = True
            trace.stop_reason = "divergence ceiling exceeded"
            return trace
        if (stop == "gap-threshold"
                and np.abs(state.x - prev_x).max() < change_tol):
            trace.stop_reason = "primal change below threshold"
            return trace
    trace.stop_reason = "iteration budget exhausted"
    return trace


def gap_certificate(problem, trace, x_ref, u_ref):
    """Averaged duality-gap report against a reference saddle point.

    Checks, for every t >= 1, that the running average of
    L(x(tau), u_ref) - L(x_ref, u(tau)) is nonnegative and bounded by
    V(0)/(2 alpha t) + alpha/2 * mean(eps(tau)).
    """
    x_ref = np.asarray(x_ref, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    gaps = np.array([problem.lagrangian(x, u_ref)
                     - problem.lagrangian(x_ref, u)
                     for x, u in zip(trace.x[:-1], trace.u[:-1])])
    eps = np.asarray(trace.eps[:-1])
    t = np.arange(1, len(gaps) + 1)
    avg_gap = np.cumsum(gaps) / t
    v0 = float(np.linalg.norm(trace.x[0] - x_ref) ** 2
               + np.linalg.norm(trace.u[0] - u_ref) ** 2)
    bound = v0 / (2.0 * trace.alpha * t) \
        + (trace.alpha / 2.0) * np.cumsum(eps) / t
    slack = 1e-9 * np.maximum(1.0, np.abs(bound))
    return {
        "avg_gap": avg_gap,
        "bound": bound,
        "v0": v0,
        "mean_eps": float(eps.mean()),
        "nonnegative": bool((avg_gap >= -slack).all()),
        "bounded": bool((avg_gap <= bound + slack).all()),
        "holds": bool((avg_gap >= -slack).all()
                      and (avg_gap <= bound + slack).all()),
        "final_avg_gap": float(avg_gap[-1]),
        "final_bound": float(bound[-1]),
    }


def lyapunov_descent_check(problem, trace, x_ref, u_ref, rel_slack=1e-9):
    """Verify V(t+1) <= V(t) - 2 alpha gap(t) + alpha^2 eps(t) stepwise."""
    x_ref = np.asarray(x_ref, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    a = trace.alpha
    worst = -np.inf
    for t in range(len(trace.x) - 1):
        v_t = (np.linalg.norm(trace.x[t] - x_ref) ** 2
               + np.linalg.norm(trace.u[t] - u_ref) ** 2)
        v_n = (np.linalg.norm(trace.x[t + 1] - x_ref) ** 2
               + np.linalg.norm(trace.u[t + 1] - u_ref) ** 2)
        gap = (problem.lagrangian(trace.x[t], u_ref)
               - problem.lagrangian(x_ref, trace.u[t]))
        rhs = v_t - 2.0 * a * gap + a * a * trace.eps[t]
        worst = max(worst, v_n - rhs)
        if v_n > rhs + rel_slack * max(1.0, abs(rhs)):
            return False, worst
    return True, worst
