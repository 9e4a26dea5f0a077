"""Per-sector agents running the primal-dual update via message passing.

Each sector agent owns its tilt, its bound multipliers, and the min-rate
multipliers of the users it serves.  Cross-sector interference sensitivities
are communicated through :class:`InterferenceReport` messages sent from a
user's serving sector to each sector interfering with that user; a
synchronous round (all round-t messages delivered before any round-t
update) reproduces one centralized engine step.

Location errors enter only through the reported user positions used for
pointing-angle estimates; received powers and SINRs always come from the
true channel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model import Network
from .problems import Multipliers, ProblemInstance, P1, P2


@dataclass(frozen=True)
class ReportEntry:
    """Per-user payload: only quantities measurable at the serving sector."""

    user_index: int
    h_interferer: float          # received power from the target sector, mW
    h_serving: float             # serving received power, mW
    sinr: tuple                  # per-sub-carrier SINR
    pointing_to_target: float    # elevation toward the target sector, deg
    weight: float                # serving-local (1 + lam_rate) chain factor


@dataclass(frozen=True)
class InterferenceReport:
    round: int
    source_sector: int
    target_sector: int
    entries: tuple


@dataclass
class SectorAgent:
    index: int
    tilt: float
    tilt_lo: float
    tilt_hi: float
    lam_lo: float = 0.0
    lam_hi: float = 0.0
    lam_rate: dict = field(default_factory=dict)   # user index -> multiplier
    mailbox: list = field(default_factory=list)

    def expected_sources(self, reports):
        return {r.source_sector for r in reports}


def inject_location_noise(net, sigma_m, seed):
    """Reported positions = true + N(0, sigma^2) per coordinate (km array)."""
    if sigma_m < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    true = np.array([[u.x_km, u.y_km] for u in net.users])
    return true + rng.normal(0.0, sigma_m / 1000.0, size=true.shape)


class DistributedRun:
    """Synchronous distributed execution of the primal-dual update.

    interference_floor: interferers contributing less than this fraction of
    a user's total interference-plus-noise are omitted from reports (0
    disables the cutoff).  drop_prob randomly discards messages; dropped
    reports count toward the staleness metric and contribute zero.
    """

    def __init__(self, inst, interference_floor=1e-3, drop_prob=0.0,
                 seed=None, message_log_path=None):
        self.inst = inst
        self.floor = interference_floor
        self.drop_prob = drop_prob
        self.rng = np.random.default_rng(seed)
        self.round_index = 0
        self.stale_messages = 0
        self.messages_sent = 0
        self.message_log_path = message_log_path
        self._log_fh = (open(message_log_path, "w")
                        if message_log_path else None)

        net = inst.net
        lo, hi = net.tilt_bounds()
        t0 = net.initial_tilts()
        self.agents = [SectorAgent(index=b, tilt=float(t0[b]),
                                   tilt_lo=float(lo[b]), tilt_hi=float(hi[b]))
                       for b in range(net.n_sectors)]
        serv = inst.cache.serv
        for u in range(net.n_users):
            self.agents[serv[u]].lam_rate[u] = 0.0
        self.tilt_history = [self.tilts()]

    # -- assembled global state (observer-side only) ------------------------

    def tilts(self):
        return np.array([a.tilt for a in self.agents])

    def multipliers(self):
        net = self.inst.net
        lam = Multipliers.zeros(net.n_users, net.n_sectors)
        for a in self.agents:
            lam.lam_lo[a.index] = a.lam_lo
            lam.lam_hi[a.index] = a.lam_hi
            for u, v in a.lam_rate.items():
                lam.lam_rate[u] = v
        return lam

    # -- one synchronous round ----------------------------------------------

    def _environment_measurements(self, tilts):
        """Physical-channel quantities each serving sector can observe."""
        inst, c = self.inst, self.inst.cache
        net = inst.net
        h_lin = c.h_linearized(tilts, inst.ref_tilts)
        denom = np.where(c.interf_mask, h_lin, 0.0).sum(axis=0)[:, None] \
            + c.noise
        U = net.n_users
        h_serv = c.h_exact(tilts)[c.serv, np.arange(U)]
        gamma = h_serv[:, None] / denom
        return h_lin, denom, h_serv, gamma

    def _local_rate(self, gamma_u):
        """Rate of one user from its measured per-sub-carrier SINR."""
        inst = self.inst
        net = inst.net
        w_per = net.bandwidth_mhz / net.n_subcarriers
        g = np.asarray(gamma_u)
        if inst.variant == P1:
            raw = w_per * np.log(net.kappa * g).sum()
        else:
            raw = w_per * np.log1p(net.kappa * g).sum()
        return min(net.rate_cap, raw), raw

    def _user_weight(self, agent, u, gamma_u):
        capped, raw = self._local_rate(gamma_u)
        if raw >= self.inst.net.rate_cap:
            return 0.0
        lam = agent.lam_rate[u]
        if self.inst.variant == P1:
            return (1.0 + lam) * float(self.inst.utility.deriv(capped))
        return (1.0 + lam) / capped

    def generate_reports(self, tilts=None):
        """Build the round's messages, one per (serving, interfered) pair."""
        inst, c = self.inst, self.inst.cache
        net = inst.net
        if tilts is None:
            tilts = self.tilts()
        h_lin, denom, h_serv, gamma = self._environment_measurements(tilts)
        point = c.point_rep if inst.use_reported_geometry else c.point
        per_pair = {}
        for u in range(net.n_users):
            s = int(c.serv[u])
            agent = self.agents[s]
            w_u = self._user_weight(agent, u, gamma[u])
            for b in range(net.n_sectors):
                if b == s:
                    continue
                if self.floor > 0 and h_lin[b, u] < self.floor * denom[u, 0]:
                    continue
                entry = ReportEntry(
                    user_index=u, h_interferer=float(h_lin[b, u]),
                    h_serving=float(h_serv[u]),
                    sinr=tuple(float(g) for g in gamma[u]),
                    pointing_to_target=float(point[b, u]), weight=w_u)
                per_pair.setdefault((s, b), []).append(entry)
        return [InterferenceReport(round=self.round_index, source_sector=s,
                                   target_sector=b, entries=tuple(es))
                for (s, b), es in sorted(per_pair.items())]

    def _deliver(self, reports):
        delivered = []
        for r in reports:
            self.messages_sent += 1
            if self.drop_prob > 0 and self.rng.random() < self.drop_prob:
                self.stale_messages += 1
                continue
            delivered.append(r)
            if self._log_fh is not None:
                self._log_fh.write(json.dumps(
                    {"round": r.round, "from": r.source_sector,
                     "to": r.target_sector,
                     "payload_entries": len(r.entries)}) + "\n")
        return delivered

    def _agent_update(self, agent, tilts, gamma, point_serv, alpha):
        """One agent's primal and dual update from purely local information.

        Reads only: the agent's own state, its served users' measurements
        (gamma rows and pointing angles), and its mailbox.
        """
        inst = self.inst
        net = inst.net
        b = agent.index
        w_per = net.bandwidth_mhz / net.n_subcarriers
        a_b = inst.cache.a[b]
        ref_b = inst.ref_tilts[b]
        row = np.zeros(net.n_users)

        # cross-terms from received interference reports
        for report in agent.mailbox:
            for e in report.entries:
                g = np.asarray(e.sinr)
                dn = e.h_serving / g
                if inst.variant == P1:
                    afac = (1.0 / dn).sum()
                else:
                    kg = net.kappa * g
                    afac = ((kg / (1.0 + kg)) / dn).sum()
                slope = 2.0 * a_b * (e.pointing_to_target - ref_b)
                elem = -w_per * e.h_interferer * afac * slope
                row[e.user_index] = elem * e.weight

        # serving terms for this agent's own users
        for u in agent.lam_rate:
            g = np.asarray(gamma[u])
            if inst.variant == P1:
                tsum = float(len(g))
            else:
                kg = net.kappa * g
                tsum = (kg / (1.0 + kg)).sum()
            s_serv = 2.0 * a_b * (point_serv[u] - agent.tilt)
            elem = w_per * tsum * s_serv
            row[u] = elem * self._user_weight(agent, u, gamma[u])

        d_tilt = -row.sum() - agent.lam_lo + agent.lam_hi
        new_tilt = agent.tilt - alpha * d_tilt
        new_lo = max(0.0, agent.lam_lo + alpha * (agent.tilt_lo - agent.tilt))
        new_hi = max(0.0, agent.lam_hi + alpha * (agent.tilt - agent.tilt_hi))
        new_rate = {}
        for u in agent.lam_rate:
            capped, _ = self._local_rate(gamma[u])
            if inst.variant == P1:
                g_rate = net.rate_floor - capped
            else:
                g_rate = math.log(net.rate_floor) - np.log(capped)
            new_rate[u] = max(0.0, agent.lam_rate[u] + alpha * g_rate)
        return new_tilt, new_lo, new_hi, new_rate

    def round(self, alpha):
        """Generate, deliver and apply one synchronous round of updates."""
        inst = self.inst
        c = inst.cache
        tilts = self.tilts()
        reports = self.generate_reports(tilts)
        for r in self._deliver(reports):
            self.agents[r.target_sector].mailbox.append(r)

        _, _, _, gamma = self._environment_measurements(tilts)
        point = c.point_rep if inst.use_reported_geometry else c.point
        U = inst.net.n_users
        point_serv = point[c.serv, np.arange(U)]

        updates = [self._agent_update(a, tilts, gamma, point_serv, alpha)
                   for a in self.agents]
        for agent, (t, lo, hi, lr) in zip(self.agents, updates):
            agent.tilt, agent.lam_lo, agent.lam_hi = t, lo, hi
            agent.lam_rate = lr
            agent.mailbox.clear()
        self.round_index += 1
        self.tilt_history.append(self.tilts())

    def run(self, alpha, rounds):
        for _ in range(rounds):
            self.round(alpha)
        return self.summary()

    def summary(self):
        return {
            "rounds": self.round_index,
            "messages_sent": self.messages_sent,
            "stale_messages": self.stale_messages,
            "staleness_fraction": (self.stale_messages / self.messages_sent
                                   if self.messages_sent else 0.0),
            "tilts": [float(t) for t in self.tilts()],
        }

    def close(self):
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None
