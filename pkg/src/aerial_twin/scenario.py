"""Scenario documents: parsing, defaults and validation.

A scenario is one JSON object. :func:`load_scenario` fills every default,
validates types, ranges and cross-references, and keeps the normalized
document (``Scenario.effective``) so a run can echo exactly what it used.
Errors carry the path of the offending field, e.g. ``missions[0].node``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

from .channel import AntennaPattern, NoiseModel, RadioConfig
from .compliance import COMPLIANCE_RULES, load_registry
from .errors import ConfigurationError, ScenarioError
from .geo import EnuVector, GeoPoint, Geofence, geodetic_to_enu
from .ran import SATURATED, LinkParams, SliceConfig, SliceTimeline, UeBinding
from .vehicle import (DEFAULT_ALLOWLIST, FILTER_RULES, SUPERVISOR_RULES, CommandKind, Mission,
                      VehicleLimits, Waypoint)

METRICS = ("rsrp_dbm", "snr_db", "throughput_bps", "rx_power_dbm")
LINK_METRICS = ("rx_power_dbm", "rsrp_dbm", "snr_db")

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "dt": 0.1,
    "strict": False,
    "origin": None,
    "geofence": None,
    "propagation": {"model": "free_space", "reflection": [-1.0, 0.0], "update_interval": 0.01},
    "noise": {"model": "thermal", "floor_dbm": None},
    "measurement": {"rate": 10.0, "links": None, "metrics": list(LINK_METRICS)},
    "supervisor": {"enabled": True, "lookahead": 1.0, "grace": 5.0},
    "allowlist": sorted(k.value for k in DEFAULT_ALLOWLIST),
    "registry": None,
    "missions": [],
    "ran": None,
    "iq": None,
}
NODE_DEFAULTS = {"heading": 0.0, "radio": None, "vehicle": None}
RADIO_DEFAULTS = {"antenna": {"kind": "isotropic"}, "noise_figure_db": 7.0, "n_prb": None, "tx_enabled": True}
VEHICLE_DEFAULTS = {"kind": "multicopter", "v_max_h": 5.0, "v_max_v": 2.0, "a_max": 2.0,
                    "arrival_radius": 1.0, "pitch_gain": 0.0}
WAYPOINT_MISSION_DEFAULTS = {"takeoff_alt": None, "arrival_radius": None}
WAYPOINT_DEFAULTS = {"speed": 5.0, "wait": 0.0, "leg": None}
ORBITER_DEFAULTS = {"radius": 20.0, "angular_rate": 0.1, "formation": None}
RAN_DEFAULTS = {"link": {"kappa": 0.75, "se_max": LinkParams().se_max, "streams": 2},
                "smoothing": 1.0, "fair_rounding": True, "timeline": []}
UE_DEFAULTS = {"demand": "saturated", "active_from": 0.0, "active_until": None}
IQ_DEFAULTS = {"interval": 1.0, "samples": 256, "dump": False}


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    kind: str  # fixed | portable
    position: GeoPoint
    enu: EnuVector
    heading: float
    radio: RadioConfig | None
    limits: VehicleLimits | None

    @property
    def station_kind(self) -> str:
        return "fixed_station" if self.kind == "fixed" else "mobile_station"


@dataclass(frozen=True)
class OrbiterSpec:
    node: str
    tracer: str
    radius: float
    angular_rate: float
    formation: EnuVector


@dataclass(frozen=True)
class RanSpec:
    cell: str
    total_prb: int
    link: LinkParams
    bindings: tuple[UeBinding, ...]
    timeline: SliceTimeline
    smoothing: float
    fair_rounding: bool


@dataclass(frozen=True)
class IqSpec:
    interval: float
    samples: int
    dump: bool


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    dt: float
    duration: float
    strict: bool
    origin: GeoPoint
    geofence: Geofence | None
    nodes: tuple[NodeSpec, ...]
    missions: dict[str, Mission]
    orbiters: tuple[OrbiterSpec, ...]
    propagation: str
    reflection: complex
    channel_update_interval: float
    noise: NoiseModel
    measurement_rate: float
    measured_links: tuple[tuple[str, str], ...]
    metrics: tuple[str, ...]
    supervisor_enabled: bool
    lookahead: float
    grace: float
    allowlist: frozenset
    registry_path: str | None
    ran: RanSpec | None
    iq: IqSpec | None
    effective: dict = field(repr=False)
    source_sha256: str = ""
    base_dir: str | None = None
    registry: tuple = field(default=(), repr=False)

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def n_ticks(self) -> int:
        return max(1, int(math.floor(self.duration / self.dt + 1e-9)))


# ---------------------------------------------------------------------------
# helpers


def _fill(d: Any, defaults: dict, path: str, required: tuple[str, ...] = ()) -> dict:
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected an object")
    allowed = set(defaults) | set(required)
    for k in d:
        if k not in allowed:
            raise ScenarioError(f"{path}.{k}" if path else k, "unknown field")
    for k in required:
        if k not in d:
            raise ScenarioError(f"{path}.{k}" if path else k, "required field missing")
    out = copy.deepcopy(defaults)
    for k, v in d.items():
        if isinstance(defaults.get(k), dict) and isinstance(v, dict):
            out[k] = _fill(v, defaults[k], f"{path}.{k}" if path else k)
        else:
            out[k] = v
    return out


def _num(v, path, *, positive=False, nonneg=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(path, f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ScenarioError(path, f"must be > 0, got {v}")
    if nonneg and v < 0:
        raise ScenarioError(path, f"must be >= 0, got {v}")
    return float(v)


def _int(v, path, *, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ScenarioError(path, f"must be >= {minimum}")
    return v


def _str(v, path, choices=None):
    if not isinstance(v, str) or not v:
        raise ScenarioError(path, f"expected a non-empty string, got {v!r}")
    if choices is not None and v not in choices:
        raise ScenarioError(path, f"must be one of {sorted(choices)}, got {v!r}")
    return v


def _list(v, path):
    if not isinstance(v, list):
        raise ScenarioError(path, "expected an array")
    return v


def _wrap(path, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ScenarioError:
        raise
    except (ConfigurationError, ValueError, TypeError) as exc:
        raise ScenarioError(path, str(exc)) from None


def _geopoint(d, path) -> GeoPoint:
    d = _fill(d, {"alt": 0.0}, path, required=("lat", "lon"))
    return _wrap(path, GeoPoint, _num(d["lat"], f"{path}.lat"), _num(d["lon"], f"{path}.lon"),
                 _num(d["alt"], f"{path}.alt"))


def _vec(v, path) -> EnuVector:
    v = _list(v, path)
    if len(v) != 3:
        raise ScenarioError(path, "expected [east, north, up]")
    return EnuVector(*(_num(x, f"{path}[{i}]") for i, x in enumerate(v)))


# ---------------------------------------------------------------------------
# sections


def _radio(d, path) -> tuple[dict, RadioConfig]:
    d = _fill(d, RADIO_DEFAULTS, path, required=("center_freq", "bandwidth", "sample_rate", "tx_power_dbm"))
    ant = d["antenna"]
    if not isinstance(ant, dict) or "kind" not in ant:
        raise ScenarioError(f"{path}.antenna", "expected an object with 'kind'")
    kind = _str(ant["kind"], f"{path}.antenna.kind", {"isotropic", "vertical_dipole", "table"})
    if kind == "table":
        a = _fill(ant, {"boresight": [0.0, 0.0]}, f"{path}.antenna", required=("kind", "azimuths", "elevations", "gains"))
        pattern = _wrap(f"{path}.antenna", AntennaPattern.from_table, a["azimuths"], a["elevations"], a["gains"],
                        a["boresight"])
    else:
        _fill(ant, {}, f"{path}.antenna", required=("kind",))
        pattern = AntennaPattern(kind)
    n_prb = d["n_prb"]
    if n_prb is not None:
        _int(n_prb, f"{path}.n_prb", minimum=1)
    cfg = _wrap(path, RadioConfig,
                center_freq=_num(d["center_freq"], f"{path}.center_freq", positive=True),
                bandwidth=_num(d["bandwidth"], f"{path}.bandwidth", positive=True),
                sample_rate=_num(d["sample_rate"], f"{path}.sample_rate", positive=True),
                tx_power_dbm=_num(d["tx_power_dbm"], f"{path}.tx_power_dbm"),
                antenna=pattern, noise_figure_db=_num(d["noise_figure_db"], f"{path}.noise_figure_db"),
                n_prb=n_prb, tx_enabled=bool(d["tx_enabled"]))
    return d, cfg


def _limits(d, path) -> tuple[dict, VehicleLimits]:
    d = _fill(d, VEHICLE_DEFAULTS, path)
    return d, _wrap(path, VehicleLimits, v_max_h=_num(d["v_max_h"], f"{path}.v_max_h"),
                    v_max_v=_num(d["v_max_v"], f"{path}.v_max_v"), a_max=_num(d["a_max"], f"{path}.a_max"),
                    kind=_str(d["kind"], f"{path}.kind", {"multicopter", "rover"}),
                    arrival_radius=_num(d["arrival_radius"], f"{path}.arrival_radius"),
                    pitch_gain=_num(d["pitch_gain"], f"{path}.pitch_gain"))


def _waypoint(d, path, origin) -> tuple[dict, Waypoint]:
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected an object")
    if "enu" in d:
        d = _fill(d, WAYPOINT_DEFAULTS, path, required=("enu",))
        pos = _vec(d["enu"], f"{path}.enu")
    else:
        d = _fill(d, {**WAYPOINT_DEFAULTS, "alt": 0.0}, path, required=("lat", "lon"))
        gp = _geopoint({k: d[k] for k in ("lat", "lon", "alt")}, path)
        pos = geodetic_to_enu(origin, gp)
    leg = d["leg"]
    if leg is not None:
        _str(leg, f"{path}.leg")
    wp = Waypoint(pos, _num(d["speed"], f"{path}.speed", positive=True),
                  _num(d["wait"], f"{path}.wait", nonneg=True), leg)
    return d, wp


def _slice_config(d, path) -> tuple[dict, SliceConfig]:
    d = _fill(d, {"work_conserving": True}, path, required=("time", "slices"))
    items = []
    for i, s in enumerate(_list(d["slices"], f"{path}.slices")):
        s = _fill(s, {}, f"{path}.slices[{i}]", required=("id", "share"))
        items.append((_str(s["id"], f"{path}.slices[{i}].id"),
                      _num(s["share"], f"{path}.slices[{i}].share", nonneg=True)))
    cfg = _wrap(path, SliceConfig.from_shares, items, bool(d["work_conserving"]))
    return d, cfg


def _ran(d, path, node_ids) -> tuple[dict, RanSpec]:
    d = _fill(d, RAN_DEFAULTS, path, required=("cell", "total_prb", "ues"))
    cell = _str(d["cell"], f"{path}.cell")
    if cell not in node_ids:
        raise ScenarioError(f"{path}.cell", f"unknown node {cell!r}")
    total = _int(d["total_prb"], f"{path}.total_prb", minimum=1)
    ln = d["link"]
    link = _wrap(f"{path}.link", LinkParams, kappa=_num(ln["kappa"], f"{path}.link.kappa", positive=True),
                 se_max=_num(ln["se_max"], f"{path}.link.se_max", positive=True),
                 streams=_int(ln["streams"], f"{path}.link.streams", minimum=1))
    entries, eff_tl = [], []
    for i, e in enumerate(_list(d["timeline"], f"{path}.timeline")):
        e_eff, cfg = _slice_config(e, f"{path}.timeline[{i}]")
        entries.append((_num(e_eff["time"], f"{path}.timeline[{i}].time", nonneg=True), cfg))
        eff_tl.append(e_eff)
    timeline = _wrap(f"{path}.timeline", SliceTimeline, tuple(entries))
    slice_ids = {s for _, c in entries for s in c.ids}
    bindings, eff_ues, seen = [], [], set()
    for i, u in enumerate(_list(d["ues"], f"{path}.ues")):
        p = f"{path}.ues[{i}]"
        u = _fill(u, UE_DEFAULTS, p, required=("ue", "slice"))
        ue = _str(u["ue"], f"{p}.ue")
        if ue not in node_ids:
            raise ScenarioError(f"{p}.ue", f"unknown node {ue!r}")
        if ue in seen:
            raise ScenarioError(f"{p}.ue", f"UE {ue!r} bound twice")
        seen.add(ue)
        sid = _str(u["slice"], f"{p}.slice")
        if slice_ids and sid not in slice_ids:
            raise ScenarioError(f"{p}.slice", f"slice {sid!r} not defined in the timeline")
        demand = SATURATED if u["demand"] == "saturated" else _num(u["demand"], f"{p}.demand", nonneg=True)
        until = math.inf if u["active_until"] is None else _num(u["active_until"], f"{p}.active_until")
        bindings.append(UeBinding(ue, sid, demand, _num(u["active_from"], f"{p}.active_from", nonneg=True), until))
        eff_ues.append(u)
    d["timeline"] = eff_tl
    d["ues"] = eff_ues
    spec = RanSpec(cell, total, link, tuple(bindings), timeline,
                   _num(d["smoothing"], f"{path}.smoothing", nonneg=True), bool(d["fair_rounding"]))
    return d, spec


# ---------------------------------------------------------------------------


def rule_names(allowlist=None) -> dict:
    return {"filter": list(FILTER_RULES), "supervisor": list(SUPERVISOR_RULES),
            "compliance": list(COMPLIANCE_RULES)}


def load_scenario(document, *, seed: int | None = None, strict: bool | None = None) -> Scenario:
    """Parse and validate a scenario.

    ``document`` may be a dict, JSON text/bytes, or a path. ``seed`` and
    ``strict`` override the document's values.
    """
    raw_bytes = None
    base_dir = None
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith("{")):
        raw_bytes = Path(document).read_bytes()
        base_dir = str(Path(document).resolve().parent)
        document = raw_bytes
    if isinstance(document, (bytes, bytearray)):
        raw_bytes = bytes(document)
        try:
            document = json.loads(raw_bytes.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise ScenarioError("", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    elif isinstance(document, str):
        raw_bytes = document.encode("utf-8")
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError("", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if raw_bytes is None:
        raw_bytes = json.dumps(document, sort_keys=True, separators=(",", ":")).encode()

    eff = _fill(document, {**DEFAULTS, "name": None, "duration": None, "nodes": None}, "",
                required=("name", "duration", "nodes"))
    if seed is not None:
        eff["seed"] = seed
    if strict is not None:
        eff["strict"] = bool(strict)
    name = _str(eff["name"], "name")
    sc_seed = _int(eff["seed"], "seed", minimum=0)
    if sc_seed >= 2 ** 64:
        raise ScenarioError("seed", "must fit in 64 bits")
    dt = _num(eff["dt"], "dt", positive=True)
    duration = _num(eff["duration"], "duration", positive=True)

    # nodes
    nodes_in = _list(eff["nodes"], "nodes")
    if not nodes_in:
        raise ScenarioError("nodes", "at least one node is required")
    eff_nodes, parsed = [], []
    ids: list[str] = []
    for i, nd in enumerate(nodes_in):
        p = f"nodes[{i}]"
        nd = _fill(nd, NODE_DEFAULTS, p, required=("id", "kind", "position"))
        nid = _str(nd["id"], f"{p}.id")
        if nid in ids:
            raise ScenarioError(f"{p}.id", f"duplicate node id {nid!r}")
        ids.append(nid)
        kind = _str(nd["kind"], f"{p}.kind", {"fixed", "portable"})
        pos = _geopoint(nd["position"], f"{p}.position")
        nd["position"] = {"lat": pos.lat, "lon": pos.lon, "alt": pos.alt}
        radio = None
        if nd["radio"] is not None:
            nd["radio"], radio = _radio(nd["radio"], f"{p}.radio")
        limits = None
        if nd["vehicle"] is not None:
            if kind == "fixed":
                raise ScenarioError(f"{p}.vehicle", "fixed nodes cannot carry vehicle limits")
            veh = dict(nd["vehicle"])
            if veh.get("kind") == "rover":
                veh.setdefault("v_max_v", 0.0)
            nd["vehicle"], limits = _limits(veh, f"{p}.vehicle")
        parsed.append((nid, kind, pos, _num(nd["heading"], f"{p}.heading"), radio, limits))
        eff_nodes.append(nd)
    eff["nodes"] = eff_nodes

    if eff["origin"] is None:
        first = parsed[0][2]
        origin = GeoPoint(first.lat, first.lon, 0.0)
        eff["origin"] = {"lat": origin.lat, "lon": origin.lon, "alt": 0.0}
    else:
        origin = _geopoint(eff["origin"], "origin")
        eff["origin"] = {"lat": origin.lat, "lon": origin.lon, "alt": origin.alt}
    nodes = tuple(NodeSpec(nid, kind, pos, geodetic_to_enu(origin, pos), hdg, radio, lim)
                  for nid, kind, pos, hdg, radio, lim in parsed)
    by_id = {n.node_id: n for n in nodes}

    # geofence
    fence = None
    if eff["geofence"] is not None:
        g = _fill(eff["geofence"], {"alt_min": 0.0, "alt_max": 120.0}, "geofence", required=("boundary",))
        pts = []
        for i, v in enumerate(_list(g["boundary"], "geofence.boundary")):
            if not (isinstance(v, list) and len(v) == 2):
                raise ScenarioError(f"geofence.boundary[{i}]", "expected [lat, lon]")
            pts.append(_wrap(f"geofence.boundary[{i}]", GeoPoint, _num(v[0], f"geofence.boundary[{i}][0]"),
                             _num(v[1], f"geofence.boundary[{i}][1]")))
        fence = _wrap("geofence", Geofence, tuple(pts), _num(g["alt_min"], "geofence.alt_min"),
                      _num(g["alt_max"], "geofence.alt_max"))
        eff["geofence"] = g

    # missions and orbiters
    missions: dict[str, Mission] = {}
    orbiter_raw = []
    eff_missions = []
    for i, ms in enumerate(_list(eff["missions"], "missions")):
        p = f"missions[{i}]"
        if not isinstance(ms, dict):
            raise ScenarioError(p, "expected an object")
        mtype = ms.get("type", "waypoints")
        _str(mtype, f"{p}.type", {"waypoints", "orbiter"})
        node = ms.get("node")
        _str(node, f"{p}.node")
        if node not in by_id:
            raise ScenarioError(f"{p}.node", f"unknown node {node!r}")
        if by_id[node].limits is None:
            raise ScenarioError(f"{p}.node", f"node {node!r} is not a vehicle")
        if node in missions or node in [o[1]["node"] for o in orbiter_raw]:
            raise ScenarioError(f"{p}.node", f"node {node!r} already has a mission")
        limits = by_id[node].limits
        if mtype == "waypoints":
            m = _fill(ms, {**WAYPOINT_MISSION_DEFAULTS, "type": "waypoints"}, p, required=("node", "waypoints"))
            wps_in = _list(m["waypoints"], f"{p}.waypoints")
            if not wps_in:
                raise ScenarioError(f"{p}.waypoints", "at least one waypoint is required")
            wps, eff_wps = [], []
            for j, w in enumerate(wps_in):
                w_eff, wp = _waypoint(w, f"{p}.waypoints[{j}]", origin)
                if wp.speed > limits.v_max_h:
                    raise ScenarioError(f"{p}.waypoints[{j}].speed", f"exceeds v_max_h {limits.v_max_h}")
                wps.append(wp)
                eff_wps.append(w_eff)
            m["waypoints"] = eff_wps
            takeoff = _num(m["takeoff_alt"], f"{p}.takeoff_alt", positive=True, allow_none=True)
            radius = m["arrival_radius"]
            radius = limits.arrival_radius if radius is None else _num(radius, f"{p}.arrival_radius", positive=True)
            m["arrival_radius"] = radius
            missions[node] = Mission(tuple(wps), takeoff_alt=takeoff, arrival_radius=radius)
        else:
            m = _fill(ms, {**ORBITER_DEFAULTS, "type": "orbiter"}, p, required=("node", "tracer"))
            orbiter_raw.append((p, m))
        eff_missions.append(m)

    orbiters = []
    for p, m in orbiter_raw:
        tracer = _str(m["tracer"], f"{p}.tracer")
        if tracer not in missions:
            raise ScenarioError(f"{p}.tracer", f"tracer {tracer!r} has no waypoint mission")
        radius = _num(m["radius"], f"{p}.radius", positive=True)
        rate = _num(m["angular_rate"], f"{p}.angular_rate")
        formation = EnuVector(radius, 0.0, 0.0) if m["formation"] is None else _vec(m["formation"], f"{p}.formation")
        m["formation"] = list(formation.as_tuple())
        orbiters.append(OrbiterSpec(m["node"], tracer, radius, rate, formation))
    for o in orbiters:
        tm = missions[o.tracer]
        missions[o.tracer] = Mission(tm.waypoints, takeoff_alt=tm.takeoff_alt, arrival_radius=tm.arrival_radius,
                                     gated=True)
        limits = by_id[o.node].limits
        wps = tuple(Waypoint(w.position + o.formation, min(w.speed, limits.v_max_h), w.wait, w.leg)
                    for w in tm.waypoints)
        takeoff = None if tm.takeoff_alt is None else tm.takeoff_alt + o.formation.up
        missions[o.node] = Mission(wps, takeoff_alt=takeoff, arrival_radius=limits.arrival_radius, gated=True)
    eff["missions"] = eff_missions

    # propagation / noise / measurement
    prop = eff["propagation"]
    model = _str(prop["model"], "propagation.model", {"free_space", "two_ray"})
    refl = _list(prop["reflection"], "propagation.reflection")
    if len(refl) != 2:
        raise ScenarioError("propagation.reflection", "expected [real, imag]")
    reflection = complex(_num(refl[0], "propagation.reflection[0]"), _num(refl[1], "propagation.reflection[1]"))
    interval = _num(prop["update_interval"], "propagation.update_interval", positive=True)
    nz = eff["noise"]
    noise = _wrap("noise", NoiseModel, _str(nz["model"], "noise.model", {"thermal", "fixed", "none"}),
                  _num(nz["floor_dbm"], "noise.floor_dbm", allow_none=True))

    meas = eff["measurement"]
    rate = _num(meas["rate"], "measurement.rate", positive=True)
    metrics = tuple(_str(x, f"measurement.metrics[{i}]", set(LINK_METRICS))
                    for i, x in enumerate(_list(meas["metrics"], "measurement.metrics")))
    radio_ids = [n.node_id for n in nodes if n.radio is not None]
    if meas["links"] is None:
        links = tuple((f.node_id, p.node_id) for p in nodes if p.kind == "portable" and p.radio is not None
                      for f in nodes if f.kind == "fixed" and f.radio is not None)
        meas["links"] = [list(x) for x in links]
    else:
        links = []
        for i, pair in enumerate(_list(meas["links"], "measurement.links")):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise ScenarioError(f"measurement.links[{i}]", "expected [tx, rx]")
            for j, nid in enumerate(pair):
                if nid not in radio_ids:
                    raise ScenarioError(f"measurement.links[{i}][{j}]", f"unknown radio node {nid!r}")
            if pair[0] == pair[1]:
                raise ScenarioError(f"measurement.links[{i}]", "a link needs two distinct nodes")
            links.append((pair[0], pair[1]))
        links = tuple(links)
    if "rsrp_dbm" in metrics:
        for tx, rx in links:
            if by_id[tx].radio.n_prb is None:
                raise ScenarioError("measurement.metrics", f"rsrp_dbm needs n_prb on transmitter {tx!r}")

    sup = eff["supervisor"]
    sup_enabled = bool(sup["enabled"]) and fence is not None
    lookahead = _num(sup["lookahead"], "supervisor.lookahead", nonneg=True)
    grace = _num(sup["grace"], "supervisor.grace", nonneg=True)

    allow = []
    for i, k in enumerate(_list(eff["allowlist"], "allowlist")):
        try:
            allow.append(CommandKind(k))
        except ValueError:
            raise ScenarioError(f"allowlist[{i}]", f"unknown command kind {k!r}") from None

    registry = eff["registry"]
    if registry is not None:
        _str(registry, "registry")

    ran = None
    if eff["ran"] is not None:
        eff["ran"], ran = _ran(eff["ran"], "ran", set(radio_ids))

    iq = None
    if eff["iq"] is not None:
        q = _fill(eff["iq"], IQ_DEFAULTS, "iq")
        rates = {n.radio.sample_rate for n in nodes if n.radio is not None}
        if len(rates) > 1:
            raise ScenarioError("iq", "IQ capture needs every radio on one sample rate")
        iq = IqSpec(_num(q["interval"], "iq.interval", positive=True), _int(q["samples"], "iq.samples", minimum=1),
                    bool(q["dump"]))
        eff["iq"] = q

    if len(radio_ids) < 2 and (links or ran is not None):
        raise ScenarioError("nodes", "at least two radio nodes are needed for links")

    eff["rules"] = rule_names()
    sc = Scenario(name=name, seed=sc_seed, dt=dt, duration=duration, strict=bool(eff["strict"]), origin=origin,
                    geofence=fence, nodes=nodes, missions=missions, orbiters=tuple(orbiters), propagation=model,
                    reflection=reflection, channel_update_interval=interval, noise=noise, measurement_rate=rate,
                    measured_links=links, metrics=metrics, supervisor_enabled=sup_enabled, lookahead=lookahead,
                    grace=grace, allowlist=frozenset(allow), registry_path=registry, ran=ran, iq=iq,
                    effective=eff, source_sha256=hashlib.sha256(raw_bytes).hexdigest(), base_dir=base_dir)
    try:
        records = load_registry(resolve_registry(sc))
    except (OSError, ConfigurationError, ValueError) as exc:
        raise ScenarioError("registry", f"cannot load registry: {exc}") from None
    return replace(sc, registry=tuple(records))


def resolve_registry(sc: Scenario) -> Path | None:
    """Path of the scenario's registry override, or None for the default chain."""
    if sc.registry_path is None:
        return None
    p = Path(sc.registry_path)
    if p.is_absolute() and p.exists():
        return p
    if sc.base_dir is not None and (Path(sc.base_dir) / p).exists():
        return Path(sc.base_dir) / p
    bundled = Path(str(resources.files("aerial_twin").joinpath("data/registries").joinpath(p.name)))
    if bundled.exists():
        return bundled
    raise ScenarioError("registry", f"registry file {sc.registry_path!r} not found")


def bundled_scenarios() -> list[str]:
    root = resources.files("aerial_twin").joinpath("data/scenarios")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def bundled_scenario_path(name: str) -> Path:
    if not name.endswith(".json"):
        name += ".json"
    p = resources.files("aerial_twin").joinpath("data/scenarios").joinpath(name)
    return Path(str(p))
