"""Wireless channel emulation.

Link budgets (free space or coherent two-ray ground), antenna patterns, the
node-level channel matrix and baseband IQ propagation with silence
suppression, plus the receiver-side measures (noise floor, RSRP, SNR).

IQ sample units are sqrt(mW): a buffer whose mean ``|x|**2`` is 1 carries
0 dBm, which is also taken as digital full scale for the dBFS silence test.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .geo import EnuVector

log = logging.getLogger(__name__)

C = 299_792_458.0
D_REF = 1.0
MAX_SAMPLE_RATE = 100e6
DIPOLE_NULL_DBI = -40.0
MIN_TWO_RAY_HEIGHT = 0.1


class NearFieldWarning(UserWarning):
    """A link distance below the 1 m reference was clamped."""


# ---------------------------------------------------------------------------
# antennas


@dataclass(frozen=True, eq=False)
class AntennaPattern:
    """Gain pattern in the body frame (x forward, y left, z up).

    ``table`` patterns hold a gain grid in dBi over azimuth (degrees,
    counter-clockwise from forward, covering -180..180) and elevation
    (degrees above the body xy plane). ``boresight`` rotates the grid by
    (azimuth, elevation) degrees.
    """

    kind: str = "isotropic"
    azimuths: np.ndarray | None = None
    elevations: np.ndarray | None = None
    gains: np.ndarray | None = None
    boresight: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("isotropic", "vertical_dipole", "table"):
            raise ConfigurationError(f"unknown antenna kind {self.kind!r}")
        if self.kind == "table":
            az = np.asarray(self.azimuths, dtype=float)
            el = np.asarray(self.elevations, dtype=float)
            g = np.asarray(self.gains, dtype=float)
            if g.shape != (az.size, el.size):
                raise ConfigurationError(f"gain table shape {g.shape} != ({az.size}, {el.size})")
            if not np.all(np.isfinite(g)):
                raise ConfigurationError("antenna gain table contains NaN or inf")
            if np.any(np.diff(az) <= 0) or np.any(np.diff(el) <= 0):
                raise ConfigurationError("antenna table axes must be strictly increasing")
            object.__setattr__(self, "azimuths", az)
            object.__setattr__(self, "elevations", el)
            object.__setattr__(self, "gains", g)

    @classmethod
    def isotropic(cls):
        return cls("isotropic")

    @classmethod
    def vertical_dipole(cls):
        return cls("vertical_dipole")

    @classmethod
    def from_table(cls, azimuths, elevations, gains, boresight=(0.0, 0.0)):
        return cls("table", azimuths, elevations, gains, tuple(boresight))

    def peak_gain(self) -> float:
        if self.kind == "isotropic":
            return 0.0
        if self.kind == "vertical_dipole":
            return 10.0 * math.log10(1.64)
        return float(np.max(self.gains))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "table":
            d.update(azimuths=self.azimuths.tolist(), elevations=self.elevations.tolist(),
                     gains=self.gains.tolist(), boresight=list(self.boresight))
        return d


def _bilinear(xs, ys, grid, x, y):
    i = int(np.clip(np.searchsorted(xs, x) - 1, 0, xs.size - 2))
    j = int(np.clip(np.searchsorted(ys, y) - 1, 0, ys.size - 2))
    tx = (x - xs[i]) / (xs[i + 1] - xs[i])
    ty = (y - ys[j]) / (ys[j + 1] - ys[j])
    tx, ty = min(max(tx, 0.0), 1.0), min(max(ty, 0.0), 1.0)
    return ((1 - tx) * (1 - ty) * grid[i, j] + tx * (1 - ty) * grid[i + 1, j]
            + (1 - tx) * ty * grid[i, j + 1] + tx * ty * grid[i + 1, j + 1])


def antenna_gain(p: AntennaPattern, direction: Sequence[float]) -> float:
    """Gain in dBi toward a unit ``direction`` given in the body frame."""
    x, y, z = (float(c) for c in direction)
    if p.kind == "isotropic":
        return 0.0
    if p.kind == "vertical_dipole":
        sin2 = max(0.0, 1.0 - z * z)  # theta measured from the dipole (z) axis
        if sin2 <= 0.0:
            return DIPOLE_NULL_DBI
        return max(DIPOLE_NULL_DBI, 10.0 * math.log10(1.64 * sin2))
    az = math.degrees(math.atan2(y, x)) - p.boresight[0]
    el = math.degrees(math.asin(max(-1.0, min(1.0, z)))) - p.boresight[1]
    az = (az + 180.0) % 360.0 - 180.0
    return float(_bilinear(p.azimuths, p.elevations, p.gains, az, el))


def world_to_body(v: EnuVector, heading: float, pitch: float = 0.0) -> tuple[float, float, float]:
    """Rotate a world ENU direction into the body frame (x forward, y left, z up).

    ``heading`` is clockwise from north; positive ``pitch`` raises the nose.
    """
    sh, ch = math.sin(heading), math.cos(heading)
    sp, cp = math.sin(pitch), math.cos(pitch)
    fwd = (sh * cp, ch * cp, sp)
    left = (-ch, sh, 0.0)
    up = (-sh * sp, -ch * sp, cp)
    w = (v.east, v.north, v.up)
    dot = lambda a: a[0] * w[0] + a[1] * w[1] + a[2] * w[2]  # noqa: E731
    return (dot(fwd), dot(left), dot(up))


# ---------------------------------------------------------------------------
# radio configuration and path loss


@dataclass(frozen=True)
class RadioConfig:
    center_freq: float
    bandwidth: float
    sample_rate: float
    tx_power_dbm: float
    antenna: AntennaPattern = field(default_factory=AntennaPattern.isotropic)
    noise_figure_db: float = 7.0
    n_prb: int | None = None
    tx_enabled: bool = True

    def __post_init__(self):
        if not self.center_freq > 0:
            raise ConfigurationError("center_freq must be positive")
        if not 0 < self.bandwidth <= self.sample_rate:
            raise ConfigurationError("need 0 < bandwidth <= sample_rate")
        if self.sample_rate > MAX_SAMPLE_RATE:
            raise ConfigurationError(f"sample_rate above {MAX_SAMPLE_RATE:.0f} Hz")
        if not math.isfinite(self.tx_power_dbm):
            raise ConfigurationError("tx_power_dbm must be finite")
        if self.n_prb is not None and self.n_prb < 1:
            raise ConfigurationError("n_prb must be >= 1")

    @property
    def eirp_dbm(self) -> float:
        return self.tx_power_dbm + self.antenna.peak_gain()


def _clamp_distance(d: float) -> float:
    if d < D_REF:
        warnings.warn(f"link distance {d:.3f} m clamped to {D_REF} m", NearFieldWarning, stacklevel=3)
        return D_REF
    return d


def free_space_path_loss(freq: float, distance: float) -> float:
    """Friis loss in dB, ``20 log10(4 pi d f / c)``."""
    if not freq > 0:
        raise ValueError("frequency must be positive")
    d = _clamp_distance(distance)
    return 20.0 * math.log10(4.0 * math.pi * d * freq / C)


def _two_ray_field(freq, distance_2d, h_tx, h_rx, reflection):
    k = 2.0 * math.pi * freq / C
    d1 = math.hypot(distance_2d, h_tx - h_rx)
    d2 = math.hypot(distance_2d, h_tx + h_rx)
    lam = C / freq
    direct = np.exp(-1j * k * d1) / d1
    reflected = reflection * np.exp(-1j * k * d2) / d2
    return complex(lam / (4.0 * math.pi) * (direct + reflected)), d1


def two_ray_path_loss(freq: float, distance_2d: float, h_tx: float, h_rx: float,
                      reflection: complex = -1.0) -> float:
    """Coherent two-ray ground loss in dB relative to isotropic antennas."""
    if not (h_tx > 0 and h_rx > 0 and distance_2d > 0):
        raise ValueError("heights and ground distance must be positive")
    if abs(reflection) == 0:
        return free_space_path_loss(freq, math.hypot(distance_2d, h_tx - h_rx))
    amp, _ = _two_ray_field(freq, distance_2d, h_tx, h_rx, reflection)
    mag = abs(amp)
    if mag == 0.0:
        return math.inf
    return -20.0 * math.log10(mag)


def break_distance(freq: float, h_tx: float, h_rx: float) -> float:
    return 4.0 * math.pi * h_tx * h_rx * freq / C


# ---------------------------------------------------------------------------
# links and the channel matrix


@dataclass(frozen=True)
class LinkGain:
    gain: complex
    delay: float
    path_loss_db: float


NULL_LINK = LinkGain(0j, 0.0, math.inf)


@dataclass(frozen=True)
class RadioNode:
    """One radio port at one node; a node with several ports appears several times."""

    node_id: str
    position: EnuVector
    radio: RadioConfig
    heading: float = 0.0
    pitch: float = 0.0
    port: int = 0

    @property
    def key(self) -> str:
        return self.node_id if self.port == 0 else f"{self.node_id}#{self.port}"


def link_budget(tx: RadioNode, rx: RadioNode, model: str = "free_space",
                reflection: complex = -1.0) -> tuple[float, LinkGain]:
    """Received power (dBm) and complex gain for the link ``tx -> rx``."""
    delta = rx.position - tx.position
    d = delta.norm()
    freq = tx.radio.center_freq
    d_eff = _clamp_distance(d)
    if d > 0:
        u = delta * (1.0 / d)
    else:
        u = EnuVector(0.0, 0.0, 1.0)
    g_tx = antenna_gain(tx.radio.antenna, world_to_body(u, tx.heading, tx.pitch))
    g_rx = antenna_gain(rx.radio.antenna, world_to_body(-u, rx.heading, rx.pitch))

    if model == "free_space":
        pl = free_space_path_loss(freq, d_eff)
        phase = -2.0 * math.pi * freq * d_eff / C
    elif model == "two_ray":
        d2d = max(delta.horizontal_norm(), 1e-3)
        h_tx = max(tx.position.up, MIN_TWO_RAY_HEIGHT)
        h_rx = max(rx.position.up, MIN_TWO_RAY_HEIGHT)
        if abs(reflection) == 0:
            pl = free_space_path_loss(freq, d_eff)
            phase = -2.0 * math.pi * freq * d_eff / C
        else:
            amp, _ = _two_ray_field(freq, d2d, h_tx, h_rx, reflection)
            pl = -20.0 * math.log10(abs(amp)) if abs(amp) > 0 else math.inf
            phase = math.atan2(amp.imag, amp.real)
    else:
        raise ConfigurationError(f"unknown propagation model {model!r}")

    rx_power = tx.radio.tx_power_dbm + g_tx + g_rx - pl
    amplitude = min(1.0, 10.0 ** ((rx_power - tx.radio.tx_power_dbm) / 20.0))  # passive channel
    gain = complex(amplitude * math.cos(phase), amplitude * math.sin(phase))
    return rx_power, LinkGain(gain, d / C, pl)


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """``gain[i, j]`` is the link from transmitter ``i`` to receiver ``j``."""

    node_ids: tuple[str, ...]
    gain: np.ndarray
    delay: np.ndarray
    path_loss_db: np.ndarray
    rx_power_dbm: np.ndarray
    timestamp: float
    muted: frozenset = frozenset()

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def index(self, node_id: str) -> int:
        return self.node_ids.index(node_id)

    def entry(self, i: int, j: int) -> LinkGain:
        if i == j:
            return NULL_LINK
        return LinkGain(complex(self.gain[i, j]), float(self.delay[i, j]), float(self.path_loss_db[i, j]))

    def link(self, tx_id: str, rx_id: str) -> LinkGain:
        return self.entry(self.index(tx_id), self.index(rx_id))

    def rx_power(self, tx_id: str, rx_id: str) -> float:
        return float(self.rx_power_dbm[self.index(tx_id), self.index(rx_id)])

    def same_as(self, other: ChannelMatrix) -> bool:
        return (self.node_ids == other.node_ids and np.array_equal(self.gain, other.gain)
                and np.array_equal(self.delay, other.delay))


def build_channel_matrix(nodes: Sequence[RadioNode], t: float, model: str = "free_space",
                         reflection: complex = -1.0, muted=()) -> ChannelMatrix:
    """Evaluate every ordered pair with :func:`link_budget`.

    Rows of ``muted`` transmitters are zeroed. Entries are written at fixed
    indices in node order, so the result does not depend on evaluation order.
    """
    if len(nodes) < 2:
        raise ConfigurationError("a channel matrix needs at least two radio nodes")
    n = len(nodes)
    keys = tuple(nd.key for nd in nodes)
    gain = np.zeros((n, n), dtype=complex)
    delay = np.zeros((n, n))
    pl = np.full((n, n), math.inf)
    rxp = np.full((n, n), -math.inf)
    muted = frozenset(muted)
    for i, tx in enumerate(nodes):
        for j, rx in enumerate(nodes):
            if i == j:
                continue
            p, lg = link_budget(tx, rx, model, reflection)
            delay[i, j] = lg.delay
            pl[i, j] = lg.path_loss_db
            if tx.node_id in muted or tx.key in muted or not tx.radio.tx_enabled:
                continue
            gain[i, j] = lg.gain
            rxp[i, j] = p
    return ChannelMatrix(keys, gain, delay, pl, rxp, float(t), muted)


class ChannelEmulator:
    """Caches the channel matrix and refreshes it on a fixed simulated-time interval."""

    def __init__(self, model: str = "free_space", reflection: complex = -1.0, update_interval: float = 0.01):
        if not update_interval > 0:
            raise ConfigurationError("channel update interval must be positive")
        self.model = model
        self.reflection = reflection
        self.update_interval = update_interval
        self.matrix: ChannelMatrix | None = None
        self.updates = 0
        self._next = 0.0

    def refresh(self, nodes: Sequence[RadioNode], t: float, muted=()) -> ChannelMatrix:
        if self.matrix is None or t + 1e-12 >= self._next:
            self.matrix = build_channel_matrix(nodes, t, self.model, self.reflection, muted)
            self.updates += 1
            periods = math.floor(t / self.update_interval + 1e-9) + 1
            self._next = periods * self.update_interval
        return self.matrix


# ---------------------------------------------------------------------------
# noise and receiver measures


@dataclass(frozen=True)
class NoiseModel:
    """``thermal``: kTB plus noise figure; ``fixed``: a configured floor; ``none``: noiseless."""

    kind: str = "thermal"
    floor_dbm: float | None = None

    def __post_init__(self):
        if self.kind not in ("thermal", "fixed", "none"):
            raise ConfigurationError(f"unknown noise model {self.kind!r}")
        if self.kind == "fixed" and (self.floor_dbm is None or not math.isfinite(self.floor_dbm)):
            raise ConfigurationError("fixed noise model needs a finite floor_dbm")


def noise_floor(model: NoiseModel, bandwidth: float, noise_figure: float) -> float:
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    if model.kind == "thermal":
        return -174.0 + 10.0 * math.log10(bandwidth) + noise_figure
    if model.kind == "fixed":
        return float(model.floor_dbm)
    return -math.inf


def rsrp(rx_power_dbm: float, n_prb: int) -> float:
    """Wideband power spread over the ``12 * n_prb`` resource elements of a symbol."""
    if n_prb < 1:
        raise ValueError("n_prb must be >= 1")
    return rx_power_dbm - 10.0 * math.log10(12 * n_prb)


def snr(rx_power_dbm: float, floor_dbm: float) -> float:
    return rx_power_dbm - floor_dbm


# ---------------------------------------------------------------------------
# IQ propagation


@dataclass(frozen=True, eq=False)
class IqBuffer:
    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if not np.all(np.isfinite(s)):
            raise ConfigurationError("IQ buffer contains non-finite samples")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    def power_dbfs(self) -> float:
        if self.samples.size == 0:
            return -math.inf
        p = float(np.mean(np.abs(self.samples) ** 2))
        return 10.0 * math.log10(p) if p > 0 else -math.inf


def polyphase_resampler(buf: IqBuffer, target_rate: float) -> IqBuffer:
    """Rational-ratio resampling with a polyphase FIR."""
    from scipy.signal import resample_poly

    if buf.sample_rate == target_rate:
        return buf
    ratio = Fraction(target_rate / buf.sample_rate).limit_denominator(1000)
    out = resample_poly(buf.samples, ratio.numerator, ratio.denominator)
    return IqBuffer(out, target_rate, buf.start_time)


def propagate_iq(inputs: Sequence[IqBuffer], m: ChannelMatrix, noise: NoiseModel, seed,
                 *, noise_figures: Sequence[float] | None = None, silence_dbfs: float = -120.0,
                 suppress_silence: bool = True,
                 resampler: Callable[[IqBuffer, float], IqBuffer] | None = None) -> tuple[list[IqBuffer], int]:
    """Propagate per-node transmit buffers to every receiver.

    ``y_j[n] = sum_{i != j} gain[i, j] * x_i[n - k_ij] + noise_j[n]`` with the
    delay rounded to whole samples. Transmitters whose buffer is all zero or
    below ``silence_dbfs`` are skipped; the count of skipped transmitters is
    returned alongside the outputs. Noise is drawn per receiver in node
    order from ``seed``, independent of which transmitters were active.
    """
    if len(inputs) != m.n:
        raise ValueError(f"{len(inputs)} buffers for a {m.n}-node channel matrix")
    rate = inputs[0].sample_rate
    if any(b.sample_rate != rate for b in inputs):
        if resampler is None:
            raise ValueError("buffers have different sample rates and no resampler is configured")
        inputs = [resampler(b, rate) for b in inputs]
    start = inputs[0].start_time
    if any(b.start_time != start for b in inputs):
        raise ValueError("buffers do not share a common start time")
    length = len(inputs[0])
    if any(len(b) != length for b in inputs):
        raise ValueError("buffers have different lengths")

    active = []
    suppressed = 0
    for b in inputs:
        silent = not np.any(b.samples) or b.power_dbfs() < silence_dbfs
        if silent and suppress_silence:
            suppressed += 1
            active.append(False)
        else:
            active.append(True)

    rng = np.random.default_rng(seed)
    nf = list(noise_figures) if noise_figures is not None else [0.0] * m.n
    outputs = []
    for j in range(m.n):
        y = np.zeros(length, dtype=complex)
        for i in range(m.n):
            if i == j or not active[i]:
                continue
            g = m.gain[i, j]
            if g == 0:
                continue
            k = int(round(m.delay[i, j] * rate))
            if k < length:
                y[k:] += g * inputs[i].samples[:length - k]
        floor = noise_floor(noise, rate, nf[j]) if length else -math.inf
        white = rng.standard_normal(2 * length)
        if math.isfinite(floor):
            sigma = math.sqrt(10.0 ** (floor / 10.0) / 2.0)
            y = y + sigma * (white[:length] + 1j * white[length:])
        outputs.append(IqBuffer(y, rate, start))
    return outputs, suppressed


def write_iq(path, buf: IqBuffer, center_freq: float, extra: dict | None = None) -> tuple[Path, Path]:
    """Dump ``buf`` as little-endian float32 I,Q pairs plus a JSON sidecar."""
    base = Path(path)
    data = base.with_suffix(".iq")
    meta = base.with_suffix(".json")
    buf.samples.astype("<c8").tofile(data)
    record = {"center_freq": center_freq, "sample_rate": buf.sample_rate,
              "start_time": buf.start_time, "samples": len(buf), "format": "cf32_le"}
    if extra:
        record.update(extra)
    meta.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return data, meta


def read_iq(path) -> tuple[IqBuffer, dict]:
    base = Path(path)
    meta = json.loads(base.with_suffix(".json").read_text())
    samples = np.fromfile(base.with_suffix(".iq"), dtype="<c8").astype(complex)
    return IqBuffer(samples, meta["sample_rate"], meta["start_time"]), meta
