"""The batch experiment loop and its outputs.

One run is a fixed-timestep loop over a validated :class:`Scenario`. Tick
``k`` covers ``[k*dt, (k+1)*dt)``: commands are produced and vetted at the
start of the tick, vehicles move, and everything observed (channel,
compliance, scheduler, measurements) is stamped with the end of the tick.
Nothing in the loop reads a clock or an unseeded RNG, so the outputs are a
pure function of the scenario and seed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .channel import (ChannelEmulator, ChannelMatrix, IqBuffer, RadioNode, noise_floor, propagate_iq, rsrp, snr,
                      write_iq)
from .compliance import Transmitter, Violation, runtime_rf_guard, validate_emission
from .geo import GeoPoint, enu_to_geodetic
from .ran import SlicedCell
from .scenario import Scenario
from .vehicle import (Accepted, Autopilot, Command, CommandKind, MissionState, Mode, Override,
                      Release, Supervisor, TracerOrbiter, VehicleState, filter_command, fsm_tick,
                      supervisor_check)

EVENT_KINDS = ("command_accepted", "command_rejected", "override", "rf_violation", "silence_suppressed",
               "slice_reconfig", "waypoint_reached")
CSV_HEADER = ("time", "node_id", "peer_node_id", "lat", "lon", "alt", "metric", "value")


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps({"time": self.time, "kind": self.kind, "payload": self.payload},
                          sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class MeasurementRecord:
    time: float
    node_id: str
    position: GeoPoint
    metric: str
    value: float
    peer_node_id: str | None = None


@dataclass
class RunLog:
    header: dict
    events: list[Event] = field(default_factory=list)

    def add(self, time: float, kind: str, **payload) -> None:
        self.events.append(Event(round(time, 9), kind, payload))

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]


@dataclass(frozen=True)
class IqCapture:
    time: float
    node_id: str
    buffer: IqBuffer
    center_freq: float


@dataclass(frozen=True)
class TrackPoint:
    time: float
    position: object  # EnuVector
    velocity: object
    mode: Mode
    armed: bool


@dataclass
class RunResult:
    scenario: Scenario
    log: RunLog
    measurements: list[MeasurementRecord]
    iq_captures: list[IqCapture]
    tracks: dict[str, list[TrackPoint]]
    summary: dict


# ---------------------------------------------------------------------------
# compliance helpers


def _eirp(node) -> float:
    return node.radio.eirp_dbm


def _can_fly(node) -> bool:
    return node.limits is not None and node.limits.kind == "multicopter"


def declared_transmitters(sc: Scenario) -> list[Transmitter]:
    """Every enabled transmitter at the highest altitude its mission reaches."""
    out = []
    for n in sc.nodes:
        if n.radio is None or not n.radio.tx_enabled:
            continue
        alt = n.enu.up
        if n.node_id in sc.missions:
            m = sc.missions[n.node_id]
            alt = max([alt, m.takeoff_alt or 0.0] + [w.position.up for w in m.waypoints])
        out.append(Transmitter(n.node_id, n.station_kind, n.radio.center_freq, n.radio.bandwidth, _eirp(n), alt,
                               _can_fly(n)))
    return out


def precheck(sc: Scenario) -> list[dict]:
    """Compliance findings for every declared transmitter; empty when all are authorized."""
    findings = []
    for tx in declared_transmitters(sc):
        res = validate_emission(tx.request(), sc.registry)
        if isinstance(res, Violation):
            findings.append({"node": tx.node_id, "reasons": list(res.reasons),
                             "band": res.band.label if res.band else None, "airborne": tx.airborne})
    return findings


# ---------------------------------------------------------------------------
# the loop


def _on_grid(t: float, rate: float) -> int:
    return int(math.floor(t * rate + 1e-6))


def _waveform(seed: int, capture: int, node_index: int, n: int, power_dbm: float) -> np.ndarray:
    rng = np.random.default_rng([seed, 1, capture, node_index])
    symbols = rng.integers(0, 4, n)
    amp = math.sqrt(10.0 ** (power_dbm / 10.0))
    return amp * np.exp(1j * (math.pi / 4 + math.pi / 2 * symbols))


class _Run:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.log = RunLog(header={
            "scenario": sc.name, "scenario_sha256": sc.source_sha256, "seed": sc.seed,
            "tool_version": __version__, "strict": sc.strict, "effective_config": sc.effective,
        })
        self.measurements: list[MeasurementRecord] = []
        self.iq: list[IqCapture] = []
        self.pilots: dict[str, Autopilot] = {}
        for n in sc.nodes:
            if n.limits is not None:
                st = VehicleState(n.enu, heading=n.heading)
                self.pilots[n.node_id] = Autopilot(n.node_id, st, n.limits)
        self.missions = dict(sc.missions)
        self.coords = [TracerOrbiter(o.tracer, o.node, o.radius, o.angular_rate) for o in sc.orbiters]
        self.fence = sc.geofence.localize(sc.origin) if sc.geofence is not None else None
        self.supervisor = (Supervisor(self.fence, sc.lookahead, sc.grace)
                           if sc.supervisor_enabled and sc.strict else None)
        self.advisory: dict[str, str | None] = {}
        self.channel = ChannelEmulator(sc.propagation, sc.reflection, sc.channel_update_interval)
        self.radio_nodes = [n for n in sc.nodes if n.radio is not None]
        self.muted: set[str] = set()
        self.pending_mute: set[str] = set()
        self.violations: dict[str, tuple] = {}
        self.cell = None
        self.cell_started = False
        if sc.ran is not None:
            r = sc.ran
            self.cell = SlicedCell(r.timeline, r.bindings, r.total_prb, r.link, r.smoothing, r.fair_rounding)
        self.tracks: dict[str, list[TrackPoint]] = {nid: [] for nid in self.pilots}
        self.counts = {"overrides": 0, "releases": 0, "rejections": 0, "violations": 0}
        self.next_meas = 1
        self.next_iq = 0
        self.matrix: ChannelMatrix | None = None
        self.throughput: dict[str, float] = {}
        self.iq_snr: dict[tuple[str, str], float] = {}

    # -- step 1/2: commands --------------------------------------------------

    def _states(self) -> dict[str, VehicleState]:
        return {nid: p.state for nid, p in self.pilots.items()}

    def _dispatch(self, t: float, node: str, cmd: Command) -> bool:
        pilot = self.pilots[node]
        alt_max = self.fence.alt_max if self.fence is not None else None
        res = filter_command(cmd, self.sc.allowlist, pilot.limits, alt_max=alt_max, locked=pilot.overridden)
        if isinstance(res, Accepted):
            pilot.apply(res.command)
            self.log.add(t, "command_accepted", node=node, command=cmd.describe())
            return True
        self.counts["rejections"] += 1
        self.log.add(t, "command_rejected", node=node, command=cmd.describe(), rule=res.reason)
        return False

    def _commands(self, t: float) -> None:
        states = self._states()
        queued: list[tuple[str, Command]] = []
        for co in self.coords:
            cmd = co.tick(self.missions, states, t)
            if cmd is not None:
                queued.append((co.orbiter, cmd))
        for nid in self.pilots:
            m = self.missions.get(nid)
            if m is None or m.finished or self.pilots[nid].overridden:
                continue
            m, cmd = fsm_tick(m, states[nid], t)
            self.missions[nid] = m
            if m.last_reached is not None:
                wp = m.waypoints[m.last_reached]
                self.log.add(t, "waypoint_reached", node=nid, index=m.last_reached, leg=wp.leg)
            if cmd is not None:
                queued.append((nid, cmd))
        for nid, cmd in queued:
            if not self._dispatch(t, nid, cmd):
                # a mission that cannot be flown as written stops where it is
                self.missions[nid] = replace(self.missions[nid], state=MissionState.ABORTED)
        self._supervise(t)

    def _supervise(self, t: float) -> None:
        if self.fence is None or not self.sc.supervisor_enabled:
            return
        for nid, pilot in self.pilots.items():
            s = pilot.state
            if self.supervisor is not None:
                res = self.supervisor.evaluate(nid, s, pilot.limits, t)
                if isinstance(res, Override):
                    self.counts["overrides"] += 1
                    action = "rtl" if res.command.kind is CommandKind.RTL else "hold"
                    self.log.add(t, "override", node=nid, rule=res.rule, action=action,
                                 command=res.command.describe(), advisory=False)
                    self._dispatch(t, nid, res.command)
                    if action == "rtl" and nid in self.missions:
                        self.missions[nid] = replace(self.missions[nid], state=MissionState.ABORTED)
                elif isinstance(res, Release):
                    self.counts["releases"] += 1
                    pilot.release()
                    self.log.add(t, "override", node=nid, rule="hold_escalation", action="release", advisory=False)
            elif s.armed:
                # development semantics: report, never steer
                res = supervisor_check(s, self.fence, self.sc.lookahead, pilot.limits)
                rule = res.rule if isinstance(res, Override) else None
                if rule is not None and self.advisory.get(nid) != rule:
                    self.counts["overrides"] += 1
                    self.log.add(t, "override", node=nid, rule=rule, action="advisory",
                                 command=res.command.describe(), advisory=True)
                self.advisory[nid] = rule

    # -- step 3: kinematics ----------------------------------------------------

    def _move(self, t_end: float) -> None:
        peers = self._states()
        for nid, pilot in self.pilots.items():
            s = pilot.step(self.sc.dt, peers)
            self.tracks[nid].append(TrackPoint(t_end, s.position, s.velocity, s.mode, s.armed))

    # -- step 4/5: channel and compliance ---------------------------------------

    def _position(self, nid: str):
        if nid in self.pilots:
            return self.pilots[nid].state
        return None

    def _radio_nodes(self) -> list[RadioNode]:
        out = []
        for n in self.radio_nodes:
            s = self._position(n.node_id)
            if s is None:
                out.append(RadioNode(n.node_id, n.enu, n.radio, n.heading))
            else:
                out.append(RadioNode(n.node_id, s.position, n.radio, s.heading, s.pitch))
        return out

    def _channel(self, t_end: float) -> None:
        if len(self.radio_nodes) < 2:
            return
        self.matrix = self.channel.refresh(self._radio_nodes(), t_end, muted=tuple(sorted(self.muted)))

    def _guard(self, t_end: float) -> None:
        self.muted |= self.pending_mute
        self.pending_mute = set()
        txs = []
        for n in self.radio_nodes:
            if not n.radio.tx_enabled or n.node_id in self.muted:
                continue
            s = self._position(n.node_id)
            alt = n.enu.up if s is None else s.position.up
            txs.append(Transmitter(n.node_id, n.station_kind, n.radio.center_freq, n.radio.bandwidth, _eirp(n), alt,
                                   _can_fly(n)))
        now = {nid: v for nid, v in runtime_rf_guard(txs, self.sc.registry)}
        for nid, v in now.items():
            if self.violations.get(nid) != v.reasons:
                self.counts["violations"] += 1
                self.log.add(t_end, "rf_violation", node=nid, reasons=list(v.reasons),
                             band=v.band.label if v.band else None, muted=self.sc.strict)
                if self.sc.strict:
                    self.pending_mute.add(nid)
        self.violations = {nid: v.reasons for nid, v in now.items()}

    # -- step 6: scheduler -------------------------------------------------------

    def _link_snr(self, tx: str, rx: str) -> float:
        if self.matrix is None:
            return -math.inf
        p = self.matrix.rx_power(tx, rx)
        if p == -math.inf:
            return -math.inf
        txr, rxr = self.sc.node(tx).radio, self.sc.node(rx).radio
        return snr(p, noise_floor(self.sc.noise, txr.bandwidth, rxr.noise_figure_db))

    def _schedule(self, t_end: float) -> None:
        if self.cell is None:
            return
        r = self.sc.ran
        snrs = {b.ue_id: self._link_snr(r.cell, b.ue_id) for b in r.bindings}
        tick = self.cell.step(t_end, snrs)
        if tick.reconfigured or not self.cell_started:
            self.cell_started = True
            self.log.add(t_end, "slice_reconfig", cell=r.cell, config=tick.config.describe())
        self.throughput = tick.smoothed_bps

    # -- step 7: measurements ----------------------------------------------------

    def _geo(self, nid: str) -> GeoPoint:
        s = self._position(nid)
        pos = self.sc.node(nid).enu if s is None else s.position
        return enu_to_geodetic(self.sc.origin, pos)

    def _capture_iq(self, t_end: float) -> None:
        sc = self.sc
        idx = self.next_iq
        self.next_iq += 1
        rate = self.radio_nodes[0].radio.sample_rate
        n = sc.iq.samples
        inputs = []
        for i, node in enumerate(self.radio_nodes):
            if node.radio.tx_enabled and node.node_id not in self.muted:
                x = _waveform(sc.seed, idx, i, n, node.radio.tx_power_dbm)
            else:
                x = np.zeros(n, dtype=complex)
            inputs.append(IqBuffer(x, rate, t_end))
        seed = np.random.SeedSequence([sc.seed, 2, idx])
        nfs = [node.radio.noise_figure_db for node in self.radio_nodes]
        outputs, suppressed = propagate_iq(inputs, self.matrix, sc.noise, seed, noise_figures=nfs)
        if suppressed:
            silent = [node.node_id for node, b in zip(self.radio_nodes, inputs) if not np.any(b.samples)]
            self.log.add(t_end, "silence_suppressed", count=suppressed, nodes=silent)
        self.iq_snr = {}
        by_id = {node.node_id: k for k, node in enumerate(self.radio_nodes)}
        for tx, rx in sc.measured_links:
            y = outputs[by_id[rx]]
            floor = noise_floor(sc.noise, rate, self.sc.node(rx).radio.noise_figure_db)
            p_mw = float(np.mean(np.abs(y.samples) ** 2))
            if math.isfinite(floor):
                n_mw = 10.0 ** (floor / 10.0)
                excess = p_mw - n_mw
                self.iq_snr[(tx, rx)] = 10.0 * math.log10(excess / n_mw) if excess > 0 else -math.inf
            else:
                self.iq_snr[(tx, rx)] = math.inf
        for node, y in zip(self.radio_nodes, outputs):
            if any(rx == node.node_id for _, rx in sc.measured_links):
                self.iq.append(IqCapture(t_end, node.node_id, y, node.radio.center_freq))

    def _measure(self, t_end: float) -> None:
        sc = self.sc
        due = _on_grid(t_end, sc.measurement_rate) >= self.next_meas
        if not due:
            return
        self.next_meas = _on_grid(t_end, sc.measurement_rate) + 1
        iq_due = False
        if sc.iq is not None and self.matrix is not None:
            iq_due = t_end + 1e-9 >= self.next_iq * sc.iq.interval
            if iq_due:
                self._capture_iq(t_end)

        def emit(node, metric, value, peer):
            if math.isfinite(value):
                self.measurements.append(MeasurementRecord(round(t_end, 9), node, self._geo(node), metric, value, peer))

        if self.matrix is not None:
            for tx, rx in sc.measured_links:
                if tx in self.muted:
                    continue
                p = self.matrix.rx_power(tx, rx)
                if "rx_power_dbm" in sc.metrics:
                    emit(rx, "rx_power_dbm", p, tx)
                if "rsrp_dbm" in sc.metrics:
                    emit(rx, "rsrp_dbm", rsrp(p, sc.node(tx).radio.n_prb), tx)
                if "snr_db" in sc.metrics:
                    if sc.iq is None:
                        emit(rx, "snr_db", self._link_snr(tx, rx), tx)
                    elif iq_due:
                        emit(rx, "snr_db", self.iq_snr[(tx, rx)], tx)
        if self.cell is not None:
            for ue, bps in sorted(self.throughput.items()):
                emit(ue, "throughput_bps", bps, sc.ran.cell)

    # -- driver -------------------------------------------------------------------

    def run(self) -> RunResult:
        sc = self.sc
        self._channel(0.0)
        for k in range(sc.n_ticks):
            t = k * sc.dt
            t_end = (k + 1) * sc.dt
            self._commands(t)
            self._move(t_end)
            self._guard(t_end)
            self._channel(t_end)
            self._schedule(t_end)
            self._measure(t_end)
        summary = {
            "ticks": sc.n_ticks,
            "overrides": self.counts["overrides"],
            "releases": self.counts["releases"],
            "rejections": self.counts["rejections"],
            "violations": self.counts["violations"],
            "records": len(self.measurements),
            "events": len(self.log.events),
            "channel_updates": self.channel.updates,
            "missions": {nid: m.state.value for nid, m in self.missions.items()},
        }
        return RunResult(sc, self.log, self.measurements, self.iq, self.tracks, summary)


def run(sc: Scenario) -> RunResult:
    """Execute ``sc``; deterministic in (scenario, seed)."""
    return _Run(sc).run()


# ---------------------------------------------------------------------------
# outputs


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def measurements_csv(records: Iterable[MeasurementRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow((_fmt(r.time), r.node_id, r.peer_node_id or "", _fmt(r.position.lat), _fmt(r.position.lon),
                    _fmt(r.position.alt), r.metric, _fmt(r.value)))
    return buf.getvalue()


def events_jsonl(log: RunLog) -> str:
    lines = [json.dumps({"kind": "header", **log.header}, sort_keys=True, separators=(",", ":"))]
    lines.extend(e.to_json() for e in log.events)
    return "\n".join(lines) + "\n"


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def emit_outputs(result: RunResult, out_dir) -> dict[str, Path]:
    """Write measurements.csv, events.jsonl, manifest.json and any IQ dumps."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, bytes] = {
        "measurements.csv": measurements_csv(result.measurements).encode(),
        "events.jsonl": events_jsonl(result.log).encode(),
    }
    paths = {}
    for name, data in files.items():
        (out / name).write_bytes(data)
        paths[name] = out / name
    hashes = {name: _sha(data) for name, data in files.items()}
    sc = result.scenario
    if sc.iq is not None and sc.iq.dump:
        iq_dir = out / "iq"
        iq_dir.mkdir(exist_ok=True)
        for cap in result.iq_captures:
            stem = iq_dir / f"{cap.node_id}_{int(round(cap.time * 1000)):08d}ms"
            data, meta = write_iq(stem, cap.buffer, cap.center_freq, {"node_id": cap.node_id})
            for p in (data, meta):
                rel = p.relative_to(out).as_posix()
                hashes[rel] = _sha(p.read_bytes())
                paths[rel] = p
    manifest = {
        "scenario": sc.name, "scenario_sha256": sc.source_sha256, "seed": sc.seed,
        "tool_version": __version__, "strict": sc.strict, "summary": result.summary, "files": hashes,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    paths["manifest.json"] = out / "manifest.json"
    return paths
