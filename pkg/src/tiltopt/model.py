"""Network geometry, scenario construction and user association.

All angles are in degrees, all distances in kilometres (antenna height in
metres, converted where needed), and all powers in linear milliwatts.
Throughputs are expressed in mega-nat/s, i.e. bandwidth is carried in MHz
and the Shannon-style rate formulas use the natural logarithm; multiply by
1/ln(2) to read the numbers as Mbit/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

LN2 = math.log(2.0)


class ScenarioError(ValueError):
    """Raised for invalid scenario specifications or invariant violations."""


# ---------------------------------------------------------------------------
# unit conversions (configuration boundary only; everything internal is linear)

def dbm_to_mw(p_dbm):
    return 10.0 ** (p_dbm / 10.0)


def mw_to_dbm(p_mw):
    return 10.0 * math.log10(p_mw)


def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x):
    return 10.0 * math.log10(x)


def mbps_to_rate(r_mbps):
    """Mbit/s -> internal rate unit (mega-nat/s)."""
    return r_mbps * LN2


def rate_to_mbps(r):
    return r / LN2


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class BaseStationSector:
    """One sector antenna; co-sited sectors are separate entries."""

    id: int
    site_id: int
    x_km: float
    y_km: float
    azimuth_deg: float
    tilt_min_deg: float
    tilt_max_deg: float
    power_mw: float          # transmit power per sub-carrier, linear
    max_gain: float          # peak antenna gain, linear
    beamwidth_deg: float     # vertical half-power beamwidth

    def validate(self):
        errors = []
        if not self.tilt_min_deg < self.tilt_max_deg:
            errors.append(f"sector {self.id}: tilt_min must be < tilt_max")
        if not self.power_mw > 0:
            errors.append(f"sector {self.id}: power must be positive")
        if not self.max_gain > 0:
            errors.append(f"sector {self.id}: max gain must be positive")
        if not self.beamwidth_deg > 0:
            errors.append(f"sector {self.id}: beamwidth must be positive")
        return errors


@dataclass(frozen=True)
class UserEquipment:
    id: int
    x_km: float
    y_km: float
    noise_mw: float          # per-sub-carrier noise power, linear
    # reported position defaults to the true one; location-noise experiments
    # overwrite it without touching the true coordinates.
    reported_x_km: float = None
    reported_y_km: float = None

    def __post_init__(self):
        if self.reported_x_km is None:
            object.__setattr__(self, "reported_x_km", self.x_km)
        if self.reported_y_km is None:
            object.__setattr__(self, "reported_y_km", self.y_km)

    def validate(self):
        if not self.noise_mw > 0:
            return [f"user {self.id}: noise power must be positive"]
        return []


@dataclass(frozen=True)
class HorizontalPattern:
    """Optional azimuth attenuation, constant with respect to tilt.

    Standard parabolic pattern: attenuation_dB = min(12 (dphi/phi_3dB)^2, floor).
    Because it does not depend on the tilt vector it leaves every convexity
    property of the tilt optimisation untouched.
    """

    enabled: bool = True
    beamwidth_deg: float = 70.0
    floor_db: float = 20.0

    def gain(self, dphi_deg):
        if not self.enabled:
            return np.ones_like(np.asarray(dphi_deg, dtype=float))
        dphi = np.abs((np.asarray(dphi_deg, dtype=float) + 180.0) % 360.0 - 180.0)
        att_db = np.minimum(12.0 * (dphi / self.beamwidth_deg) ** 2, self.floor_db)
        return 10.0 ** (-att_db / 10.0)


@dataclass(frozen=True)
class Network:
    """Immutable scenario: sectors, users, association and channel constants."""

    sectors: tuple
    users: tuple
    association: dict        # user id -> sector id
    height_m: float
    rho0: float
    beta: float
    bandwidth_mhz: float
    n_subcarriers: int
    kappa: float
    rate_cap: float          # r_bar, mega-nat/s
    rate_floor: float        # r_lower, mega-nat/s
    horizontal: HorizontalPattern = field(default_factory=HorizontalPattern)
    shadow_db: np.ndarray = None          # (B, U) frozen realization, dB
    # optional per-link line-of-sight channel: where los_mask is True the
    # LOS path-loss constants apply instead of (rho0, beta)
    los_mask: np.ndarray = None           # (B, U) bool
    los_rho0: float = None
    los_beta: float = None
    initial_tilt_deg: float = 8.0
    shadow_sigma_db: float = 0.0
    shadow_seed: int = 0
    los_probability: float = 0.0
    los_seed: int = 0

    def __post_init__(self):
        errors = self.invariant_errors()
        if errors:
            raise ScenarioError("; ".join(errors))

    def invariant_errors(self):
        errors = []
        for s in self.sectors:
            errors.extend(s.validate())
        for u in self.users:
            errors.extend(u.validate())
        sector_ids = {s.id for s in self.sectors}
        for u in self.users:
            if u.id not in self.association:
                errors.append(f"user {u.id}: missing association")
            elif self.association[u.id] not in sector_ids:
                errors.append(f"user {u.id}: associated to unknown sector "
                              f"{self.association[u.id]}")
        if self.n_subcarriers < 1:
            errors.append("n_subcarriers must be >= 1")
        if not (0 <= self.rate_floor < self.rate_cap):
            errors.append("need 0 <= rate_floor < rate_cap")
        if not self.rho0 > 0:
            errors.append("rho0 must be positive")
        if not self.beta > 0:
            errors.append("beta must be positive")
        return errors

    @property
    def n_sectors(self):
        return len(self.sectors)

    @property
    def n_users(self):
        return len(self.users)

    def sector_index(self, sector_id):
        for i, s in enumerate(self.sectors):
            if s.id == sector_id:
                return i
        raise KeyError(sector_id)

    def serving_indices(self):
        """Array mapping user position -> serving sector position."""
        id_to_idx = {s.id: i for i, s in enumerate(self.sectors)}
        return np.array([id_to_idx[self.association[u.id]] for u in self.users],
                        dtype=int)

    def initial_tilts(self):
        return np.full(self.n_sectors, self.initial_tilt_deg, dtype=float)

    def tilt_bounds(self):
        lo = np.array([s.tilt_min_deg for s in self.sectors])
        hi = np.array([s.tilt_max_deg for s in self.sectors])
        return lo, hi

    def with_reported_positions(self, reported):
        """Return a copy whose users carry the given reported positions.

        ``reported`` is an (U, 2) array in km.  True positions (and therefore
        the channel itself) are unchanged.
        """
        reported = np.asarray(reported, dtype=float)
        users = tuple(
            replace(u, reported_x_km=float(reported[i, 0]),
                    reported_y_km=float(reported[i, 1]))
            for i, u in enumerate(self.users)
        )
        return replace(self, users=users)

    def with_association(self, association):
        return replace(self, association=dict(association))

    def with_rates(self, rate_cap=None, rate_floor=None):
        kw = {}
        if rate_cap is not None:
            kw["rate_cap"] = rate_cap
        if rate_floor is not None:
            kw["rate_floor"] = rate_floor
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# geometry

def distance(sector, user, use_reported=False):
    """Euclidean distance between a sector site and a user, in km."""
    ux = user.reported_x_km if use_reported else user.x_km
    uy = user.reported_y_km if use_reported else user.y_km
    return math.hypot(ux - sector.x_km, uy - sector.y_km)


def pointing_angle(sector, user, net, use_reported=False):
    """Elevation angle from the antenna down to the user, degrees in (0, 90)."""
    d = distance(sector, user, use_reported=use_reported)
    if d <= 0.0:
        raise ScenarioError(
            f"degenerate geometry: sector {sector.id} and user {user.id} "
            "are co-located")
    return math.degrees(math.atan((net.height_m / 1000.0) / d))


# ---------------------------------------------------------------------------
# scenario construction

# 3GPP-style defaults (macro site, 10 MHz downlink)
DEFAULT_RADIO = dict(
    height_m=25.0,
    rho0=0.0316,
    beta=3.76,
    bandwidth_mhz=10.0,
    n_subcarriers=1,
    kappa=1.0,
    power_dbm=46.0,
    max_gain_dbi=15.0,
    beamwidth_deg=10.0,
    noise_dbm=-94.97,
    tilt_min_deg=5.0,
    tilt_max_deg=20.0,
    min_rate_mbps=0.064,
    max_rate_mbps=10.0,
    initial_tilt_deg=8.0,
)

THREE_SECTOR_AZIMUTHS = (0.0, 120.0, 240.0)


@dataclass
class ClusterSpec:
    """A disc of users placed along a sector's azimuth."""

    site: int
    sector: int              # sector index within the site (0..2)
    n_users: int
    distance_m: float        # cluster centre distance from the site
    radius_m: float = 15.0


@dataclass
class HexScenarioSpec:
    n_sites: int = 3
    sectors_per_site: int = 3
    isd_m: float = 500.0
    layout: str = "line"                 # "line" or "hex"
    radio: dict = field(default_factory=dict)
    clusters: list = field(default_factory=list)
    edge_users: list = field(default_factory=list)   # (x_km, y_km) positions
    uniform_users: int = 0
    uniform_radius_m: float = 0.0
    hotspot_fraction: float = 0.0        # used by the urban generator
    shadow_sigma_db: float = 0.0
    los_probability: float = 0.0
    association: str = "explicit"        # or "strongest"
    seed: int = 0

    def validate(self):
        if self.isd_m <= 0:
            raise ScenarioError("inter-site distance must be positive")
        if self.sectors_per_site not in (1, 3):
            raise ScenarioError("sectors_per_site must be 1 or 3")
        if self.n_sites < 1:
            raise ScenarioError("need at least one site")


def _site_positions(spec):
    isd = spec.isd_m / 1000.0
    if spec.layout == "line":
        return [(i * isd, 0.0) for i in range(spec.n_sites)]
    if spec.layout == "hex":
        pos = [(0.0, 0.0)]
        ring = 1
        while len(pos) < spec.n_sites:
            for k in range(6 * ring):
                angle = math.pi / 3 * (k / ring)
                # walk the hexagonal ring corner to corner
                corner = k // ring
                frac = (k % ring) / ring
                a0 = math.pi / 3 * corner
                a1 = math.pi / 3 * (corner + 1)
                x = ring * isd * ((1 - frac) * math.cos(a0) + frac * math.cos(a1))
                y = ring * isd * ((1 - frac) * math.sin(a0) + frac * math.sin(a1))
                pos.append((x, y))
                if len(pos) == spec.n_sites:
                    break
            ring += 1
        return pos
    raise ScenarioError(f"unknown layout {spec.layout!r}")


def _build_sectors(spec, radio):
    azimuths = THREE_SECTOR_AZIMUTHS[: spec.sectors_per_site]
    sectors = []
    sid = 0
    for site_id, (x, y) in enumerate(_site_positions(spec)):
        for az in azimuths:
            sectors.append(BaseStationSector(
                id=sid, site_id=site_id, x_km=x, y_km=y, azimuth_deg=az,
                tilt_min_deg=radio["tilt_min_deg"],
                tilt_max_deg=radio["tilt_max_deg"],
                power_mw=dbm_to_mw(radio["power_dbm"]),
                max_gain=db_to_linear(radio["max_gain_dbi"]),
                beamwidth_deg=radio["beamwidth_deg"],
            ))
            sid += 1
    return sectors


def _frozen_shadow(sigma_db, seed, n_sectors, n_users):
    if sigma_db <= 0.0:
        return None
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, sigma_db, size=(n_sectors, n_users))


def _frozen_los(p, seed, n_sectors, n_users):
    if p <= 0.0:
        return None
    rng = np.random.default_rng(seed)
    return rng.random(size=(n_sectors, n_users)) < p


def build_hex_scenario(spec):
    """Deterministic Network from a grid spec; pure function of (spec, seed)."""
    spec.validate()
    radio = dict(DEFAULT_RADIO)
    radio.update(spec.radio)

    sectors = _build_sectors(spec, radio)
    rng = np.random.default_rng(spec.seed)
    noise_mw = dbm_to_mw(radio["noise_dbm"])

    users = []
    explicit = {}
    uid = 0
    for cl in spec.clusters:
        base = sectors[cl.site * spec.sectors_per_site + cl.sector]
        az = math.radians(base.azimuth_deg)
        cx = base.x_km + (cl.distance_m / 1000.0) * math.cos(az)
        cy = base.y_km + (cl.distance_m / 1000.0) * math.sin(az)
        r = (cl.radius_m / 1000.0) * np.sqrt(rng.random(cl.n_users))
        ang = rng.random(cl.n_users) * 2 * math.pi
        for k in range(cl.n_users):
            users.append(UserEquipment(
                id=uid, x_km=cx + r[k] * math.cos(ang[k]),
                y_km=cy + r[k] * math.sin(ang[k]), noise_mw=noise_mw))
            explicit[uid] = base.id
            uid += 1
    for (ex, ey) in spec.edge_users:
        users.append(UserEquipment(id=uid, x_km=ex, y_km=ey, noise_mw=noise_mw))
        uid += 1
    if spec.uniform_users:
        rad = spec.uniform_radius_m / 1000.0
        r = rad * np.sqrt(rng.random(spec.uniform_users))
        ang = rng.random(spec.uniform_users) * 2 * math.pi
        for k in range(spec.uniform_users):
            users.append(UserEquipment(
                id=uid, x_km=r[k] * math.cos(ang[k]), y_km=r[k] * math.sin(ang[k]),
                noise_mw=noise_mw))
            uid += 1
    if not users:
        raise ScenarioError("scenario has no users")

    shadow = _frozen_shadow(spec.shadow_sigma_db, spec.seed + 1,
                            len(sectors), len(users))
    los = _frozen_los(spec.los_probability, spec.seed + 2,
                      len(sectors), len(users))

    horizontal = HorizontalPattern(enabled=spec.sectors_per_site > 1)
    net = Network(
        sectors=tuple(sectors), users=tuple(users),
        association={u.id: sectors[0].id for u in users},   # provisional
        height_m=radio["height_m"], rho0=radio["rho0"], beta=radio["beta"],
        bandwidth_mhz=radio["bandwidth_mhz"],
        n_subcarriers=radio["n_subcarriers"], kappa=radio["kappa"],
        rate_cap=mbps_to_rate(radio["max_rate_mbps"]),
        rate_floor=mbps_to_rate(radio["min_rate_mbps"]),
        horizontal=horizontal, shadow_db=shadow,
        los_mask=los, los_rho0=10.0 ** -3.4 if los is not None else None,
        los_beta=2.2 if los is not None else None,
        initial_tilt_deg=radio["initial_tilt_deg"],
        shadow_sigma_db=spec.shadow_sigma_db, shadow_seed=spec.seed + 1,
        los_probability=spec.los_probability, los_seed=spec.seed + 2,
    )

    if spec.association == "explicit" and explicit:
        assoc = dict(explicit)
        # non-cluster users (edge / uniform) fall back to strongest power
        missing = [u.id for u in net.users if u.id not in assoc]
        if missing:
            strongest = associate_users(net, "strongest", net.initial_tilts())
            for m in missing:
                assoc[m] = strongest[m]
    else:
        assoc = associate_users(net, "strongest", net.initial_tilts())
    return net.with_association(assoc)


def associate_users(net, policy, tilts=None):
    """Build a user -> sector association map.

    ``strongest`` picks the sector with the largest exact received power at
    the given tilt vector; ties break toward the lowest sector id.
    """
    if policy == "explicit":
        return dict(net.association)
    if policy != "strongest":
        raise ScenarioError(f"unknown association policy {policy!r}")
    if tilts is None:
        raise ScenarioError("strongest-power association needs a tilt vector")
    from .radio import received_power_exact   # cycle-free at call time
    assoc = {}
    for u in net.users:
        best_id, best_p = None, -1.0
        for i, s in enumerate(net.sectors):
            p = received_power_exact(s, u, float(tilts[i]), net)
            if p > best_p:
                best_id, best_p = s.id, p
        assoc[u.id] = best_id
    return assoc


# ---------------------------------------------------------------------------
# canned scenarios

def cluster_scenario(seed=0, radio=None, cluster_distance_m=40.0,
                     cluster_radius_m=5.0):
    """Two 16-user clusters plus two cell-edge users on a 3-site line.

    The clusters sit right under their serving sectors (large pointing
    angles), so the fixed 8-degree baseline badly underserves them; the
    edge users sit between the second and third sites.
    """
    spec = HexScenarioSpec(
        n_sites=3, sectors_per_site=3, isd_m=500.0, layout="line",
        radio=radio or {},
        clusters=[ClusterSpec(site=0, sector=0, n_users=16,
                              distance_m=cluster_distance_m,
                              radius_m=cluster_radius_m),
                  ClusterSpec(site=1, sector=2, n_users=16,
                              distance_m=cluster_distance_m,
                              radius_m=cluster_radius_m)],
        edge_users=[(0.75, 0.0), (0.75, -0.002)],
        association="explicit", seed=seed,
    )
    return build_hex_scenario(spec)


def fairness_scenario(seed=0):
    """Cluster layout with a genuine cluster/edge tilt trade-off.

    Clusters sit at a moderate distance along the east-pointing sectors of
    the first two sites; the edge users live off-axis where the second
    cluster's serving sector is their dominant interferer.  The rate cap is
    loose so no user saturates, keeping both problem variants smooth and
    making the fairness contrast between them visible.
    """
    spec = HexScenarioSpec(
        n_sites=3, sectors_per_site=3, isd_m=500.0, layout="line",
        radio={"max_rate_mbps": 200.0, "min_rate_mbps": 0.001},
        clusters=[ClusterSpec(site=0, sector=0, n_users=16,
                              distance_m=150.0, radius_m=20.0),
                  ClusterSpec(site=1, sector=0, n_users=16,
                              distance_m=150.0, radius_m=20.0)],
        edge_users=[(0.75, -0.3), (0.75, -0.302)],
        association="explicit", seed=seed,
    )
    return build_hex_scenario(spec)


DUBLIN_RADIO = dict(
    rho0=10.0 ** -2.1,       # NLOS fixed path loss factor
    beta=3.9,                # NLOS path loss exponent
    max_rate_mbps=100.0,     # loose cap: urban figures are uncapped
    min_rate_mbps=0.001,     # urban drops contain chronically weak users
)


def urban_scenario(seed=0, n_users=330, n_sites=7, isd_m=800.0,
                   hotspot_fraction=0.9, shadow_sigma_db=6.0,
                   los_probability=0.0,
                   hotspot_bands_km=((0.040, 0.055), (0.085, 0.105),
                                     (0.150, 0.180)),
                   hotspot_band_weights=(3.0, 1.0, 1.0),
                   hotspot_radius_km=0.012):
    """Synthetic urban drop: hex sites, per-sector hotspots, uniform rest.

    Each sector owns one hotspot placed out along its azimuth; the
    distance band cycles with the sector index so the three co-sited
    sectors serve hotspots at distinct elevations, and most traffic sits
    in the near band far below the initial beam pointing distance.
    Hotspot users are associated with their own sector (the deployment
    serves its local traffic); uniform users pick the strongest sector.
    """
    spec = HexScenarioSpec(
        n_sites=n_sites, sectors_per_site=3, isd_m=isd_m, layout="hex",
        radio=dict(DUBLIN_RADIO),
        shadow_sigma_db=shadow_sigma_db, los_probability=los_probability,
        association="strongest", seed=seed,
    )
    spec.validate()
    radio = dict(DEFAULT_RADIO)
    radio.update(spec.radio)
    sectors = _build_sectors(spec, radio)
    rng = np.random.default_rng(seed)
    noise_mw = dbm_to_mw(radio["noise_dbm"])

    n_hot = int(round(n_users * hotspot_fraction))
    users = []
    uid = 0
    hot_sector = []
    weights = np.array([hotspot_band_weights[j % len(hotspot_bands_km)]
                        for j in range(len(sectors))], dtype=float)
    per_sector = rng.multinomial(n_hot, weights / weights.sum())
    for j, (s, count) in enumerate(zip(sectors, per_sector)):
        if count == 0:
            continue
        az = math.radians(s.azimuth_deg)
        d0 = rng.uniform(*hotspot_bands_km[j % len(hotspot_bands_km)])
        cx, cy = s.x_km + d0 * math.cos(az), s.y_km + d0 * math.sin(az)
        r = hotspot_radius_km * np.sqrt(rng.random(count))
        ang = rng.random(count) * 2 * math.pi
        for k in range(count):
            users.append(UserEquipment(
                id=uid, x_km=cx + r[k] * math.cos(ang[k]),
                y_km=cy + r[k] * math.sin(ang[k]), noise_mw=noise_mw))
            hot_sector.append(s.id)
            uid += 1
    area_r = isd_m / 1000.0 * 1.1
    n_uni = n_users - len(users)
    r = area_r * np.sqrt(rng.random(n_uni))
    ang = rng.random(n_uni) * 2 * math.pi
    for k in range(n_uni):
        users.append(UserEquipment(
            id=uid, x_km=r[k] * math.cos(ang[k]), y_km=r[k] * math.sin(ang[k]),
            noise_mw=noise_mw))
        hot_sector.append(None)
        uid += 1

    shadow = _frozen_shadow(shadow_sigma_db, seed + 1, len(sectors), len(users))
    los = _frozen_los(los_probability, seed + 2, len(sectors), len(users))
    net = Network(
        sectors=tuple(sectors), users=tuple(users),
        association={u.id: sectors[0].id for u in users},
        height_m=radio["height_m"], rho0=radio["rho0"], beta=radio["beta"],
        bandwidth_mhz=radio["bandwidth_mhz"],
        n_subcarriers=radio["n_subcarriers"], kappa=radio["kappa"],
        rate_cap=mbps_to_rate(radio["max_rate_mbps"]),
        rate_floor=mbps_to_rate(radio["min_rate_mbps"]),
        horizontal=HorizontalPattern(enabled=True), shadow_db=shadow,
        los_mask=los, los_rho0=10.0 ** -3.4 if los is not None else None,
        los_beta=2.2 if los is not None else None,
        initial_tilt_deg=radio["initial_tilt_deg"],
        shadow_sigma_db=shadow_sigma_db, shadow_seed=seed + 1,
        los_probability=los_probability, los_seed=seed + 2,
    )
    assoc = associate_users(net, "strongest", net.initial_tilts())
    for i, u in enumerate(net.users):
        if hot_sector[i] is not None:
            assoc[u.id] = hot_sector[i]
    return net.with_association(assoc)
