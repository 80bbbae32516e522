"""Sliced PRB scheduling and a link-adaptive throughput model.

Slices receive PRBs in proportion to their shares. In work-conserving mode
capacity a demand-limited slice cannot use is water-filled over the slices
that still want more, and the continuous result is rounded to whole PRBs by
largest remainder (ties go to the slice listed first). Within a slice the
grant is split evenly over its active UEs with the same machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ConfigurationError

SATURATED = math.inf
UNSLICED = "unsliced"
PRB_BANDWIDTH_HZ = 180e3

_REMAINDER_DIGITS = 9


@dataclass(frozen=True)
class Slice:
    slice_id: str
    share: float


@dataclass(frozen=True)
class SliceConfig:
    slices: tuple[Slice, ...]
    work_conserving: bool = True

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))
        if not self.slices:
            raise ConfigurationError("a slice configuration needs at least one slice")
        ids = [s.slice_id for s in self.slices]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate slice ids in {ids}")
        for s in self.slices:
            if not 0.0 <= s.share <= 1.0:
                raise ConfigurationError(f"slice {s.slice_id} share {s.share} outside [0, 1]")
        total = sum(s.share for s in self.slices)
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"slice shares sum to {total}, not 1")

    @classmethod
    def unsliced(cls):
        return cls((Slice(UNSLICED, 1.0),))

    @classmethod
    def from_shares(cls, shares: Mapping[str, float] | Sequence[tuple[str, float]],
                    work_conserving: bool = True, normalize: bool = False):
        items = list(shares.items()) if isinstance(shares, Mapping) else list(shares)
        if normalize:
            total = sum(v for _, v in items)
            items = [(k, v / total) for k, v in items]
        return cls(tuple(Slice(k, float(v)) for k, v in items), work_conserving)

    @property
    def ids(self) -> list[str]:
        return [s.slice_id for s in self.slices]

    def share_map(self) -> dict[str, float]:
        return {s.slice_id: s.share for s in self.slices}

    def describe(self) -> dict:
        return {"slices": [[s.slice_id, s.share] for s in self.slices],
                "work_conserving": self.work_conserving}


@dataclass(frozen=True)
class UeBinding:
    ue_id: str
    slice_id: str
    demand: float = SATURATED  # bits/s
    active_from: float = 0.0
    active_until: float = math.inf

    def active(self, t: float) -> bool:
        return self.active_from - 1e-9 <= t < self.active_until - 1e-9


@dataclass(frozen=True)
class PrbAllocation:
    tick_time: float
    grants: dict[str, int]
    total_prb: int

    def __post_init__(self):
        if sum(self.grants.values()) > self.total_prb:
            raise ValueError("allocation exceeds the PRB budget")


@dataclass(frozen=True)
class SliceTimeline:
    entries: tuple[tuple[float, SliceConfig], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((float(t), c) for t, c in self.entries))
        times = [t for t, _ in self.entries]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("slice timeline times must be strictly increasing")


def apply_timeline(tl: SliceTimeline, t: float) -> SliceConfig:
    """Configuration in force at ``t``; before the first entry the cell is unsliced."""
    current = SliceConfig.unsliced()
    for when, cfg in tl.entries:
        if when <= t + 1e-9:
            current = cfg
        else:
            break
    return current


def largest_remainder(quotas: Sequence[float], seats: int, caps: Sequence[float] | None = None) -> list[int]:
    """Round ``quotas`` to integers summing to ``seats`` (or the caps' total, if smaller).

    Floors first, then one extra seat each in order of decreasing fractional
    part; equal remainders favour the lower index.
    """
    n = len(quotas)
    caps = [math.inf] * n if caps is None else list(caps)
    q = [min(max(x, 0.0), c) for x, c in zip(quotas, caps)]
    out = [min(int(math.floor(x + 1e-12)), int(c) if math.isfinite(c) else seats) for x, c in zip(q, caps)]
    room = sum(min(c, seats) for c in caps)
    leftover = min(seats, room) - sum(out)
    ranked = sorted(range(n), key=lambda i: (-round(q[i] - out[i], _REMAINDER_DIGITS), i))
    while leftover > 0:
        progressed = False
        for i in ranked:
            if leftover == 0:
                break
            if out[i] < caps[i]:
                out[i] += 1
                leftover -= 1
                progressed = True
        if not progressed:
            break
    while leftover < 0:  # floors overshoot only when carries push quotas past the total
        for i in reversed(ranked):
            if leftover == 0:
                break
            if out[i] > 0:
                out[i] -= 1
                leftover += 1
    return out


def water_fill(weights: Sequence[float], demands: Sequence[float], capacity: float) -> list[float]:
    """Continuous proportional allocation where saturated entries release their excess."""
    n = len(weights)
    x = [0.0] * n
    active = [i for i in range(n) if demands[i] > 0]
    pool = float(capacity)
    while active and pool > 1e-12:
        w = [weights[i] for i in active]
        wsum = sum(w)
        if wsum <= 0:
            w = [1.0] * len(active)
            wsum = float(len(active))
        offer = {i: pool * wi / wsum for i, wi in zip(active, w)}
        capped = [i for i in active if x[i] + offer[i] >= demands[i]]
        if not capped:
            for i in active:
                x[i] += offer[i]
            break
        for i in capped:
            pool -= demands[i] - x[i]
            x[i] = demands[i]
        active = [i for i in active if i not in capped]
    return x


def schedule_prbs(cfg: SliceConfig, demands: Mapping[str, float], total_prb: int,
                  tick_time: float = 0.0, carry: Mapping[str, float] | None = None,
                  ideal_out: dict | None = None) -> PrbAllocation:
    """Grant PRBs to slices.

    ``demands`` maps slice id to PRBs wanted (``SATURATED`` for unlimited;
    missing ids want nothing). ``carry`` optionally biases the rounding by
    each slice's accumulated rounding debt so repeated calls converge on the
    exact proportional average; ``ideal_out`` receives the unrounded grants.
    """
    if total_prb < 1:
        raise ValueError("total_prb must be >= 1")
    ids = cfg.ids
    shares = [s.share for s in cfg.slices]
    d = [min(float(demands.get(i, 0.0)), float(total_prb)) for i in ids]
    if cfg.work_conserving:
        ideal = water_fill(shares, d, total_prb)
        seats = int(round(sum(ideal)))
        bias = [0.0] * len(ids) if carry is None else [carry.get(i, 0.0) for i in ids]
        grants = largest_remainder([x + b for x, b in zip(ideal, bias)], seats, caps=d)
    else:
        ideal = [min(s * total_prb, di) for s, di in zip(shares, d)]
        raw = largest_remainder([s * total_prb for s in shares], total_prb)
        grants = [min(g, int(di)) for g, di in zip(raw, d)]
    if ideal_out is not None:
        ideal_out.update(zip(ids, ideal))
    return PrbAllocation(tick_time, dict(zip(ids, grants)), total_prb)


# ---------------------------------------------------------------------------
# throughput


@dataclass(frozen=True)
class LinkParams:
    """Truncated-Shannon link abstraction.

    The default cap makes 100 PRBs at high SNR with two spatial streams
    deliver 170 Mbit/s.
    """

    kappa: float = 0.75
    se_max: float = 170e6 / (100 * PRB_BANDWIDTH_HZ * 2)
    streams: int = 2
    prb_bandwidth: float = PRB_BANDWIDTH_HZ


def spectral_efficiency(snr_db: float, link: LinkParams = LinkParams()) -> float:
    if snr_db == -math.inf:
        return 0.0
    if snr_db == math.inf:
        return link.se_max
    return min(link.se_max, link.kappa * math.log2(1.0 + 10.0 ** (snr_db / 10.0)))


def prb_throughput(snr_db: float, n_prb: int, link: LinkParams = LinkParams()) -> float:
    """Bits/s carried by ``n_prb`` PRBs at ``snr_db``."""
    if n_prb < 0:
        raise ValueError("n_prb must be >= 0")
    if n_prb == 0:
        return 0.0
    return n_prb * link.prb_bandwidth * spectral_efficiency(snr_db, link) * link.streams


def unsliced_throughput(snr_db: float, total_prb: int, link: LinkParams = LinkParams()) -> float:
    """Reference path: one UE owning the whole carrier, no slicing machinery involved."""
    return prb_throughput(snr_db, total_prb, link)


def prbs_for_demand(demand_bps: float, snr_db: float, total_prb: int, link: LinkParams) -> float:
    if demand_bps == SATURATED:
        return float(total_prb)
    per_prb = prb_throughput(snr_db, 1, link)
    if per_prb <= 0:
        return 0.0
    return float(min(total_prb, math.ceil(demand_bps / per_prb - 1e-9)))


@dataclass
class CellTick:
    config: SliceConfig
    reconfigured: bool
    slice_grants: dict[str, int]
    ue_prbs: dict[str, int]
    raw_bps: dict[str, float]
    smoothed_bps: dict[str, float]


@dataclass
class SlicedCell:
    """Per-tick scheduler state: timeline resolution, rounding debt and smoothing.

    ``fair_rounding`` carries each slice's and UE's rounding debt from tick
    to tick, so integer grants average to the exact proportional share.
    """

    timeline: SliceTimeline
    bindings: tuple[UeBinding, ...]
    total_prb: int
    link: LinkParams = field(default_factory=LinkParams)
    smoothing: float = 1.0
    fair_rounding: bool = True
    _config: SliceConfig | None = None
    _slice_carry: dict = field(default_factory=dict)
    _ue_carry: dict = field(default_factory=dict)
    _smoothed: dict = field(default_factory=dict)
    _last_t: float | None = None

    def _slice_of(self, b: UeBinding, cfg: SliceConfig) -> str | None:
        if b.slice_id in cfg.ids:
            return b.slice_id
        if len(cfg.slices) == 1:
            return cfg.slices[0].slice_id
        return None

    def step(self, t: float, snr_db: Mapping[str, float]) -> CellTick:
        cfg = apply_timeline(self.timeline, t)
        reconfigured = self._config is not None and cfg != self._config
        if reconfigured:
            self._slice_carry.clear()
            self._ue_carry.clear()
        self._config = cfg

        members: dict[str, list[UeBinding]] = {s: [] for s in cfg.ids}
        for b in self.bindings:
            sid = self._slice_of(b, cfg)
            if sid is not None and b.active(t):
                members[sid].append(b)
        ue_demand = {b.ue_id: prbs_for_demand(b.demand, snr_db.get(b.ue_id, -math.inf), self.total_prb, self.link)
                     for ms in members.values() for b in ms}
        slice_demand = {sid: min(float(self.total_prb), sum(ue_demand[b.ue_id] for b in ms))
                        for sid, ms in members.items()}

        ideal: dict[str, float] = {}
        alloc = schedule_prbs(cfg, slice_demand, self.total_prb, t,
                              self._slice_carry if self.fair_rounding else None, ideal_out=ideal)
        if self.fair_rounding:
            for sid in cfg.ids:
                self._slice_carry[sid] = self._slice_carry.get(sid, 0.0) + ideal[sid] - alloc.grants[sid]

        ue_prbs: dict[str, int] = {}
        for sid, ms in members.items():
            if not ms:
                continue
            sub = SliceConfig.from_shares([(b.ue_id, 1.0 / len(ms)) for b in ms], normalize=True)
            sub_ideal: dict[str, float] = {}
            sub_alloc = schedule_prbs(sub, {b.ue_id: ue_demand[b.ue_id] for b in ms}, max(1, alloc.grants[sid]), t,
                                      self._ue_carry if self.fair_rounding else None, ideal_out=sub_ideal)
            for b in ms:
                g = sub_alloc.grants[b.ue_id] if alloc.grants[sid] > 0 else 0
                ue_prbs[b.ue_id] = g
                if self.fair_rounding and alloc.grants[sid] > 0:
                    self._ue_carry[b.ue_id] = self._ue_carry.get(b.ue_id, 0.0) + sub_ideal[b.ue_id] - g

        raw = {ue: prb_throughput(snr_db.get(ue, -math.inf), n, self.link) for ue, n in ue_prbs.items()}
        dt = 0.0 if self._last_t is None else t - self._last_t
        alpha = 1.0 - math.exp(-dt / self.smoothing) if self.smoothing > 0 else 1.0
        for ue, r in raw.items():
            prev = self._smoothed.get(ue)
            self._smoothed[ue] = r if prev is None else prev + alpha * (r - prev)
        for ue in list(self._smoothed):
            if ue not in raw:
                del self._smoothed[ue]
        self._last_t = t
        return CellTick(cfg, reconfigured, dict(alloc.grants), ue_prbs, raw,
                        {ue: self._smoothed[ue] for ue in raw})


def ue_throughput_trace(timeline: SliceTimeline, bindings: Iterable[UeBinding],
                        link_trace: Iterable[tuple[float, Mapping[str, float]]], total_prb: int,
                        link: LinkParams = LinkParams(), smoothing: float = 1.0,
                        fair_rounding: bool = True) -> list[tuple[float, str, float]]:
    """Smoothed per-UE throughput over the ticks of ``link_trace``.

    ``link_trace`` yields ``(t, {ue_id: snr_db})`` on a regular grid.
    """
    cell = SlicedCell(timeline, tuple(bindings), total_prb, link, smoothing, fair_rounding)
    out = []
    for t, snrs in link_trace:
        tick = cell.step(t, snrs)
        out.extend((t, ue, bps) for ue, bps in sorted(tick.smoothed_bps.items()))
    return out
