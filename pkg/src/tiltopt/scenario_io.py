"""Scenario file I/O: human-readable INI with per-entity dotted keys.

Every key carries a unit suffix (``power_dbm``, ``x_km``, ...).  The
``schema`` field is mandatory and versioned; unknown sections or fields are
rejected.  Frozen random fields (shadow fading, per-link LOS draws) are
stored as (sigma, seed) and regenerated deterministically at load, so a
save/load round trip reproduces the Network exactly.
"""

from __future__ import annotations

import configparser

from .model import (HorizontalPattern, Network, BaseStationSector,
                    UserEquipment, ScenarioError, dbm_to_mw, db_to_linear,
                    mbps_to_rate, _frozen_shadow, _frozen_los)

SCHEMA_ID = "tiltopt-scenario-1"

_RADIO_FIELDS = {"rho0", "beta", "bandwidth_mhz", "n_subcarriers", "kappa",
                 "rate_cap_mnats", "rate_floor_mnats", "rate_cap_mbps",
                 "rate_floor_mbps", "height_m"}
_SECTOR_FIELDS = {"site", "x_km", "y_km", "azimuth_deg", "tilt_min_deg",
                  "tilt_max_deg", "power_mw", "power_dbm", "max_gain_linear",
                  "max_gain_dbi", "beamwidth_deg"}
_USER_FIELDS = {"x_km", "y_km", "noise_mw", "noise_dbm", "sector",
                "reported_x_km", "reported_y_km"}
_HORIZONTAL_FIELDS = {"enabled", "beamwidth_deg", "floor_db"}
_FADING_FIELDS = {"shadow_sigma_db", "shadow_seed", "los_probability",
                  "los_seed", "los_rho0", "los_beta"}
_OPT_FIELDS = {"initial_tilt_deg"}


def _r(value):
    """Shortest exact decimal form; plain floats even for numpy scalars."""
    return repr(float(value))


def save_scenario(net, path):
    """Write a Network to the scenario file format."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["scenario"] = {"schema": SCHEMA_ID}
    cp["radio"] = {
        "height_m": _r(net.height_m),
        "rho0": _r(net.rho0),
        "beta": _r(net.beta),
        "bandwidth_mhz": _r(net.bandwidth_mhz),
        "n_subcarriers": str(net.n_subcarriers),
        "kappa": _r(net.kappa),
        "rate_cap_mnats": _r(net.rate_cap),
        "rate_floor_mnats": _r(net.rate_floor),
    }
    sec = {}
    for i, s in enumerate(net.sectors):
        p = f"s{s.id}"
        sec[f"{p}.site"] = str(s.site_id)
        sec[f"{p}.x_km"] = _r(s.x_km)
        sec[f"{p}.y_km"] = _r(s.y_km)
        sec[f"{p}.azimuth_deg"] = _r(s.azimuth_deg)
        sec[f"{p}.tilt_min_deg"] = _r(s.tilt_min_deg)
        sec[f"{p}.tilt_max_deg"] = _r(s.tilt_max_deg)
        sec[f"{p}.power_mw"] = _r(s.power_mw)
        sec[f"{p}.max_gain_linear"] = _r(s.max_gain)
        sec[f"{p}.beamwidth_deg"] = _r(s.beamwidth_deg)
    cp["sites"] = sec
    usr = {}
    for u in net.users:
        p = f"u{u.id}"
        usr[f"{p}.x_km"] = _r(u.x_km)
        usr[f"{p}.y_km"] = _r(u.y_km)
        usr[f"{p}.noise_mw"] = _r(u.noise_mw)
        usr[f"{p}.sector"] = str(net.association[u.id])
        if (u.reported_x_km != u.x_km) or (u.reported_y_km != u.y_km):
            usr[f"{p}.reported_x_km"] = _r(u.reported_x_km)
            usr[f"{p}.reported_y_km"] = _r(u.reported_y_km)
    cp["users"] = usr
    cp["horizontal"] = {
        "enabled": str(net.horizontal.enabled).lower(),
        "beamwidth_deg": _r(net.horizontal.beamwidth_deg),
        "floor_db": _r(net.horizontal.floor_db),
    }
    fading = {
        "shadow_sigma_db": _r(net.shadow_sigma_db),
        "shadow_seed": str(net.shadow_seed),
        "los_probability": _r(net.los_probability),
        "los_seed": str(net.los_seed),
    }
    if net.los_rho0 is not None:
        fading["los_rho0"] = _r(net.los_rho0)
        fading["los_beta"] = _r(net.los_beta)
    cp["fading"] = fading
    cp["optimisation"] = {"initial_tilt_deg": _r(net.initial_tilt_deg)}
    with open(path, "w") as fh:
        cp.write(fh)


def _reject_unknown(section_name, section, allowed, dotted=False):
    for key in section:
        field = key.split(".", 1)[1] if dotted and "." in key else key
        if dotted and "." not in key:
            raise ScenarioError(
                f"[{section_name}] key {key!r}: expected <entity>.<field>")
        if field not in allowed:
            raise ScenarioError(
                f"[{section_name}] unknown field {field!r} in key {key!r}")


def _entities(section_name, section, allowed, prefix):
    """Group dotted keys by entity id, in id order."""
    _reject_unknown(section_name, section, allowed, dotted=True)
    by_id = {}
    for key, value in section.items():
        name, field = key.split(".", 1)
        if not (name.startswith(prefix) and name[len(prefix):].isdigit()):
            raise ScenarioError(
                f"[{section_name}] bad entity name {name!r} "
                f"(expected {prefix}<integer>)")
        by_id.setdefault(int(name[len(prefix):]), {})[field] = value
    return dict(sorted(by_id.items()))


def _get_float(fields, key, entity, alternatives=()):
    for k, convert in ((key, float),) + tuple(alternatives):
        if k in fields:
            try:
                return convert(float(fields[k]))
            except ValueError as exc:
                raise ScenarioError(f"{entity}: bad value for {k!r}: "
                                    f"{fields[k]!r}") from exc
    raise ScenarioError(f"{entity}: missing field {key!r}")


def load_scenario(path):
    """Parse a scenario file into a Network, validating every invariant."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ScenarioError(f"parse error in {path}: {exc}") from exc
    if not read:
        raise ScenarioError(f"cannot read scenario file {path}")

    known = {"scenario", "radio", "sites", "users", "horizontal", "fading",
             "optimisation"}
    for name in cp.sections():
        if name not in known:
            raise ScenarioError(f"unknown section [{name}]")
    for required in ("scenario", "radio", "sites", "users"):
        if required not in cp:
            raise ScenarioError(f"missing section [{required}]")

    _reject_unknown("scenario", cp["scenario"], {"schema"})
    schema = cp["scenario"].get("schema")
    if schema != SCHEMA_ID:
        raise ScenarioError(f"unsupported schema {schema!r} "
                            f"(expected {SCHEMA_ID!r})")

    _reject_unknown("radio", cp["radio"], _RADIO_FIELDS)
    radio = cp["radio"]
    rate_cap = _get_float(radio, "rate_cap_mnats", "[radio]",
                          alternatives=(("rate_cap_mbps", mbps_to_rate),))
    rate_floor = _get_float(radio, "rate_floor_mnats", "[radio]",
                            alternatives=(("rate_floor_mbps", mbps_to_rate),))

    sectors = []
    for sid, f in _entities("sites", cp["sites"], _SECTOR_FIELDS, "s").items():
        ent = f"sector s{sid}"
        sectors.append(BaseStationSector(
            id=sid, site_id=int(f.get("site", 0)),
            x_km=_get_float(f, "x_km", ent),
            y_km=_get_float(f, "y_km", ent),
            azimuth_deg=_get_float(f, "azimuth_deg", ent),
            tilt_min_deg=_get_float(f, "tilt_min_deg", ent),
            tilt_max_deg=_get_float(f, "tilt_max_deg", ent),
            power_mw=_get_float(f, "power_mw", ent,
                                alternatives=(("power_dbm", dbm_to_mw),)),
            max_gain=_get_float(f, "max_gain_linear", ent,
                                alternatives=(("max_gain_dbi",
                                               db_to_linear),)),
            beamwidth_deg=_get_float(f, "beamwidth_deg", ent)))

    users = []
    association = {}
    for uid, f in _entities("users", cp["users"], _USER_FIELDS, "u").items():
        ent = f"user u{uid}"
        if "sector" not in f:
            raise ScenarioError(f"{ent}: missing association "
                                "(explicit policy requires a sector field)")
        association[uid] = int(f["sector"])
        kw = {}
        if "reported_x_km" in f or "reported_y_km" in f:
            kw["reported_x_km"] = _get_float(f, "reported_x_km", ent)
            kw["reported_y_km"] = _get_float(f, "reported_y_km", ent)
        users.append(UserEquipment(
            id=uid, x_km=_get_float(f, "x_km", ent),
            y_km=_get_float(f, "y_km", ent),
            noise_mw=_get_float(f, "noise_mw", ent,
                                alternatives=(("noise_dbm", dbm_to_mw),)),
            **kw))

    horizontal = HorizontalPattern()
    if "horizontal" in cp:
        _reject_unknown("horizontal", cp["horizontal"], _HORIZONTAL_FIELDS)
        h = cp["horizontal"]
        horizontal = HorizontalPattern(
            enabled=h.get("enabled", "true").lower() in ("true", "1", "yes"),
            beamwidth_deg=float(h.get("beamwidth_deg", 70.0)),
            floor_db=float(h.get("floor_db", 20.0)))

    shadow_sigma = 0.0
    shadow_seed = 0
    los_p = 0.0
    los_seed = 0
    los_rho0 = los_beta = None
    if "fading" in cp:
        _reject_unknown("fading", cp["fading"], _FADING_FIELDS)
        f = cp["fading"]
        shadow_sigma = float(f.get("shadow_sigma_db", 0.0))
        shadow_seed = int(f.get("shadow_seed", 0))
        los_p = float(f.get("los_probability", 0.0))
        los_seed = int(f.get("los_seed", 0))
        if "los_rho0" in f:
            los_rho0 = float(f["los_rho0"])
            los_beta = float(f["los_beta"])

    initial_tilt = 8.0
    if "optimisation" in cp:
        _reject_unknown("optimisation", cp["optimisation"], _OPT_FIELDS)
        initial_tilt = float(cp["optimisation"].get("initial_tilt_deg", 8.0))

    B, U = len(sectors), len(users)
    shadow = _frozen_shadow(shadow_sigma, shadow_seed, B, U)
    los = _frozen_los(los_p, los_seed, B, U)
    if los is not None and los_rho0 is None:
        raise ScenarioError("los_probability > 0 requires los_rho0/los_beta")

    try:
        return Network(
            sectors=tuple(sectors), users=tuple(users),
            association=association,
            height_m=_get_float(radio, "height_m", "[radio]"),
            rho0=_get_float(radio, "rho0", "[radio]"),
            beta=_get_float(radio, "beta", "[radio]"),
            bandwidth_mhz=_get_float(radio, "bandwidth_mhz", "[radio]"),
            n_subcarriers=int(radio.get("n_subcarriers", 1)),
            kappa=_get_float(radio, "kappa", "[radio]"),
            rate_cap=rate_cap, rate_floor=rate_floor,
            horizontal=horizontal, shadow_db=shadow,
            los_mask=los, los_rho0=los_rho0, los_beta=los_beta,
            initial_tilt_deg=initial_tilt,
            shadow_sigma_db=shadow_sigma, shadow_seed=shadow_seed,
            los_probability=los_p, los_seed=los_seed)
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
