"""Figure rendering for experiment reports.

Every experiment's report directory gets plot files next to the delimited
outputs.  All functions take plain arrays plus an output path and return
the path written; no interactive backends are used.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def tilt_trajectories(tilt_history, path, alpha=None):
    """One line per sector: tilt angle versus iteration."""
    hist = np.asarray(tilt_history)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for b in range(hist.shape[1]):
        ax.plot(hist[:, b], lw=1.0, label=f"sector {b}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("tilt angle (deg)")
    title = "Tilt trajectories"
    if alpha is not None:
        title += f" (step size {alpha})"
    ax.set_title(title)
    if hist.shape[1] <= 12:
        ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def rate_cdf(rate_sets, path, xlabel="throughput (mega-nat/s)"):
    """Empirical CDFs; rate_sets maps label -> per-user rates."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, rates in rate_sets.items():
        r = np.sort(np.asarray(rates))
        ax.step(r, np.arange(1, len(r) + 1) / len(r), where="post",
                label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("fraction of users")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=9)
    ax.set_title("User throughput CDF")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def per_user_rates(rate_sets, path):
    """Grouped per-user rate bars for small scenarios."""
    labels = list(rate_sets)
    n = len(next(iter(rate_sets.values())))
    width = 0.8 / len(labels)
    fig, ax = plt.subplots(figsize=(max(7, n * 0.25), 4.5))
    x = np.arange(n)
    for i, label in enumerate(labels):
        ax.bar(x + i * width, rate_sets[label], width=width, label=label)
    ax.set_xlabel("user")
    ax.set_ylabel("throughput (mega-nat/s)")
    ax.legend(fontsize=9)
    ax.set_title("Per-user throughput")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def sweep_curve(x, y, path, xlabel, ylabel, infeasible_from=None):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(x, y, "o-")
    if infeasible_from is not None:
        ax.axvline(infeasible_from, color="r", ls="--",
                   label="first infeasible")
        ax.legend(fontsize=9)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
