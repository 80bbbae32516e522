"""Spectrum authorization registry and emission validation.

The default registry encodes a 13-band FCC Innovation Zone plan.
Alternate registries (for example a ported experimental license) load from
the same JSON format: an array of band objects with frequencies as
integer Hz.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigurationError

AIRBORNE_ALTITUDE_M = 0.5
REGISTRY_ENV = "AERIAL_TWIN_REGISTRY"

OPERATIONS = ("fixed", "mobile", "fixed_and_mobile")
ALLOCATIONS = ("federal_shared", "non_federal")
STATION_KINDS = ("fixed_station", "mobile_station")

# violation reasons
OUT_OF_BAND = "out_of_band"
OPERATION_NOT_PERMITTED = "operation_not_permitted"
EIRP_EXCEEDED = "eirp_exceeded"
AIRBORNE_PROHIBITED = "airborne_prohibited"
NO_EIRP_LIMIT = "no_eirp_limit"
COMPLIANCE_RULES = (OUT_OF_BAND, OPERATION_NOT_PERMITTED, EIRP_EXCEEDED, AIRBORNE_PROHIBITED, NO_EIRP_LIMIT)


@dataclass(frozen=True)
class BandRecord:
    low: int
    high: int
    operation: str
    allocation: str
    fs_max_eirp: float | None
    ms_max_eirp: float | None
    airborne_prohibited: bool = False
    coordination_required: bool = False
    footnotes: tuple[int, ...] = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "footnotes", tuple(self.footnotes))
        if not self.low < self.high:
            raise ConfigurationError(f"band {self.label or self.low}: low must be below high")
        if self.operation not in OPERATIONS:
            raise ConfigurationError(f"band {self.label}: unknown operation {self.operation!r}")
        if self.allocation not in ALLOCATIONS:
            raise ConfigurationError(f"band {self.label}: unknown allocation {self.allocation!r}")
        if self.fs_max_eirp is None and self.ms_max_eirp is None:
            raise ConfigurationError(f"band {self.label}: needs at least one EIRP limit")

    def permits(self, node_kind: str) -> bool:
        if self.operation == "fixed_and_mobile":
            return True
        return (self.operation == "fixed") == (node_kind == "fixed_station")

    def eirp_limit(self, node_kind: str) -> float | None:
        return self.fs_max_eirp if node_kind == "fixed_station" else self.ms_max_eirp

    def to_dict(self) -> dict:
        d = asdict(self)
        d["footnotes"] = list(self.footnotes)
        return d


@dataclass(frozen=True)
class EmissionRequest:
    node_kind: str
    airborne: bool
    center_freq: float
    bandwidth: float
    eirp: float

    def __post_init__(self):
        if self.node_kind not in STATION_KINDS:
            raise ConfigurationError(f"unknown station kind {self.node_kind!r}")
        if not self.bandwidth > 0:
            raise ConfigurationError("emission bandwidth must be positive")


@dataclass(frozen=True)
class Authorized:
    band: BandRecord
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class Violation:
    reasons: tuple[str, ...]
    band: BandRecord | None = None


# ---------------------------------------------------------------------------
# registry IO


def registry_from_json(text: str) -> list[BandRecord]:
    rows = json.loads(text)
    if not isinstance(rows, list):
        raise ConfigurationError("registry document must be a JSON array")
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(BandRecord(**row))
        except TypeError as exc:
            raise ConfigurationError(f"registry[{i}]: {exc}") from None
    return out


def registry_to_json(records: Iterable[BandRecord]) -> str:
    return json.dumps([r.to_dict() for r in records], indent=2) + "\n"


def default_registry_text() -> str:
    return resources.files("aerial_twin").joinpath("data/registry.json").read_text()


def load_default_registry() -> list[BandRecord]:
    return registry_from_json(default_registry_text())


def load_registry(path=None) -> list[BandRecord]:
    """Registry at ``path``, else ``$AERIAL_TWIN_REGISTRY``, else the default."""
    path = path or os.environ.get(REGISTRY_ENV)
    if not path:
        return load_default_registry()
    return registry_from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# validation


def _inside(req: EmissionRequest, band: BandRecord) -> bool:
    # exact rational arithmetic so a band edge touched exactly is never misjudged
    half = Fraction(req.bandwidth) / 2
    f = Fraction(req.center_freq)
    return f - half >= band.low and f + half <= band.high


def validate_emission(req: EmissionRequest, registry: Sequence[BandRecord]) -> Authorized | Violation:
    """Check ``req`` against the first registry band that fully contains it."""
    candidates = [b for b in registry if _inside(req, b)]
    if not candidates:
        return Violation((OUT_OF_BAND,))
    first = None
    for band in candidates:
        reasons = []
        if not band.permits(req.node_kind):
            reasons.append(OPERATION_NOT_PERMITTED)
        else:
            limit = band.eirp_limit(req.node_kind)
            if limit is None:
                reasons.append(NO_EIRP_LIMIT)
            elif req.eirp > limit:
                reasons.append(EIRP_EXCEEDED)
        if req.airborne and band.airborne_prohibited:
            reasons.append(AIRBORNE_PROHIBITED)
        if not reasons:
            warnings = []
            if band.coordination_required:
                warnings.append("coordination_required")
            if band.allocation == "federal_shared":
                warnings.append("shared_allocation")
            return Authorized(band, tuple(warnings))
        if first is None:
            first = Violation(tuple(reasons), band)
    return first


@dataclass(frozen=True)
class Transmitter:
    node_id: str
    node_kind: str
    center_freq: float
    bandwidth: float
    eirp: float
    altitude: float
    can_fly: bool = True

    @property
    def airborne(self) -> bool:
        return self.can_fly and self.altitude > AIRBORNE_ALTITUDE_M

    def request(self) -> EmissionRequest:
        return EmissionRequest(self.node_kind, self.airborne, self.center_freq, self.bandwidth, self.eirp)


def runtime_rf_guard(transmitters: Iterable[Transmitter], registry: Sequence[BandRecord]) -> list[tuple[str, Violation]]:
    """Re-validate every active transmitter; returns the offenders in input order."""
    out = []
    for tx in transmitters:
        res = validate_emission(tx.request(), registry)
        if isinstance(res, Violation):
            out.append((tx.node_id, res))
    return out
