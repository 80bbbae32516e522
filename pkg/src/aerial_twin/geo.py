"""Local coordinate frames, distances and geofence containment.

Positions are converted to a local east/north/up tangent plane with an
equirectangular projection: meters-per-degree is held constant at the origin
latitude. Over the few kilometres a testbed spans the error is far below a
meter, and the projection is exactly invertible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConfigurationError

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0  # 111194.93 m

_BOUNDARY_EPS_M = 1e-6


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float
    alt: float = 0.0  # meters above the origin ground plane

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ConfigurationError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ConfigurationError(f"longitude {self.lon} outside [-180, 180]")
        if not math.isfinite(self.alt):
            raise ConfigurationError(f"altitude {self.alt} is not finite")


@dataclass(frozen=True)
class EnuVector:
    east: float = 0.0
    north: float = 0.0
    up: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.east) and math.isfinite(self.north) and math.isfinite(self.up)):
            raise ConfigurationError(f"non-finite ENU vector {self}")

    def __add__(self, other: EnuVector) -> EnuVector:
        return EnuVector(self.east + other.east, self.north + other.north, self.up + other.up)

    def __sub__(self, other: EnuVector) -> EnuVector:
        return EnuVector(self.east - other.east, self.north - other.north, self.up - other.up)

    def __mul__(self, k: float) -> EnuVector:
        return EnuVector(self.east * k, self.north * k, self.up * k)

    __rmul__ = __mul__

    def __neg__(self) -> EnuVector:
        return EnuVector(-self.east, -self.north, -self.up)

    def norm(self) -> float:
        return math.sqrt(self.east * self.east + self.north * self.north + self.up * self.up)

    def horizontal_norm(self) -> float:
        return math.hypot(self.east, self.north)

    def horizontal(self) -> EnuVector:
        return EnuVector(self.east, self.north, 0.0)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.east, self.north, self.up)

    @classmethod
    def of(cls, values: Sequence[float]) -> EnuVector:
        e, n, u = values
        return cls(float(e), float(n), float(u))


ZERO = EnuVector()


def geodetic_to_enu(origin: GeoPoint, p: GeoPoint) -> EnuVector:
    """Project ``p`` onto the tangent plane at ``origin``."""
    coslat = math.cos(math.radians(origin.lat))
    east = (p.lon - origin.lon) * METERS_PER_DEG * coslat
    north = (p.lat - origin.lat) * METERS_PER_DEG
    return EnuVector(east, north, p.alt - origin.alt)


def enu_to_geodetic(origin: GeoPoint, v: EnuVector) -> GeoPoint:
    """Inverse of :func:`geodetic_to_enu`."""
    coslat = math.cos(math.radians(origin.lat))
    lat = origin.lat + v.north / METERS_PER_DEG
    lon = origin.lon + v.east / (METERS_PER_DEG * coslat)
    return GeoPoint(lat, lon, origin.alt + v.up)


def distance_3d(a: EnuVector, b: EnuVector) -> float:
    return (a - b).norm()


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_segment(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_segment(p1, p2, q1)) or (o2 == 0 and on_segment(p1, p2, q2))
            or (o3 == 0 and on_segment(q1, q2, p1)) or (o4 == 0 and on_segment(q1, q2, p2)))


def _signed_area(xy: Sequence[tuple[float, float]]) -> float:
    n = len(xy)
    return 0.5 * sum(xy[i][0] * xy[(i + 1) % n][1] - xy[(i + 1) % n][0] * xy[i][1] for i in range(n))


class _Polygon:
    """Planar polygon with boundary-inclusive ray casting."""

    def __init__(self, xy: Sequence[tuple[float, float]], eps: float):
        if len(xy) < 3:
            raise ConfigurationError("geofence needs at least 3 vertices")
        self.xy = [(float(x), float(y)) for x, y in xy]
        self.eps = eps
        if abs(_signed_area(self.xy)) <= 0.0:
            raise ConfigurationError("geofence polygon is degenerate (zero area)")
        n = len(self.xy)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_cross(self.xy[i], self.xy[(i + 1) % n], self.xy[j], self.xy[(j + 1) % n]):
                    raise ConfigurationError(f"geofence polygon self-intersects (edges {i} and {j})")

    def edges(self):
        n = len(self.xy)
        for i in range(n):
            yield self.xy[i], self.xy[(i + 1) % n]

    def edge_distance(self, x: float, y: float) -> float:
        best = math.inf
        for (ax, ay), (bx, by) in self.edges():
            dx, dy = bx - ax, by - ay
            seg2 = dx * dx + dy * dy
            t = 0.0 if seg2 == 0 else max(0.0, min(1.0, ((x - ax) * dx + (y - ay) * dy) / seg2))
            best = min(best, math.hypot(x - (ax + t * dx), y - (ay + t * dy)))
        return best

    def contains(self, x: float, y: float) -> bool:
        if self.edge_distance(x, y) <= self.eps:
            return True
        inside = False
        for (ax, ay), (bx, by) in self.edges():
            if (ay > y) != (by > y):
                xc = ax + (y - ay) * (bx - ax) / (by - ay)
                if x < xc:
                    inside = not inside
        return inside


@dataclass(frozen=True)
class Geofence:
    """Polygon (lat/lon, altitude ignored) plus an altitude band."""

    boundary: tuple[GeoPoint, ...]
    alt_min: float
    alt_max: float

    def __post_init__(self):
        object.__setattr__(self, "boundary", tuple(self.boundary))
        if not self.alt_min < self.alt_max:
            raise ConfigurationError(f"alt_min {self.alt_min} must be below alt_max {self.alt_max}")
        # validates vertex count, area and simplicity
        _Polygon([(p.lon, p.lat) for p in self.boundary], eps=0.0)

    def localize(self, origin: GeoPoint) -> LocalFence:
        pts = [geodetic_to_enu(origin, p) for p in self.boundary]
        return LocalFence([(v.east, v.north) for v in pts],
                          self.alt_min - origin.alt, self.alt_max - origin.alt)


def contains(fence: Geofence, p: GeoPoint) -> bool:
    """True iff ``p`` is inside the polygon (boundary inclusive) and the altitude band."""
    poly = _Polygon([(q.lon, q.lat) for q in fence.boundary], eps=1e-12)
    return poly.contains(p.lon, p.lat) and fence.alt_min <= p.alt <= fence.alt_max


class LocalFence:
    """A geofence expressed in the ENU frame of a simulation origin."""

    def __init__(self, polygon: Iterable[tuple[float, float]], alt_min: float, alt_max: float):
        if not alt_min < alt_max:
            raise ConfigurationError(f"alt_min {alt_min} must be below alt_max {alt_max}")
        self.polygon = _Polygon(list(polygon), eps=_BOUNDARY_EPS_M)
        self.alt_min = float(alt_min)
        self.alt_max = float(alt_max)

    @property
    def vertices(self) -> list[tuple[float, float]]:
        return list(self.polygon.xy)

    def centroid(self) -> EnuVector:
        xy = self.polygon.xy
        a = _signed_area(xy)
        n = len(xy)
        cx = cy = 0.0
        for i in range(n):
            (x0, y0), (x1, y1) = xy[i], xy[(i + 1) % n]
            cross = x0 * y1 - x1 * y0
            cx += (x0 + x1) * cross
            cy += (y0 + y1) * cross
        return EnuVector(cx / (6 * a), cy / (6 * a), 0.5 * (self.alt_min + self.alt_max))

    def contains(self, v: EnuVector) -> bool:
        return self.polygon.contains(v.east, v.north) and self.alt_min <= v.up <= self.alt_max

    def distance_outside(self, v: EnuVector) -> float:
        """Euclidean distance from ``v`` to the fence volume; 0 when inside."""
        horiz = 0.0 if self.polygon.contains(v.east, v.north) else self.polygon.edge_distance(v.east, v.north)
        vert = max(0.0, self.alt_min - v.up, v.up - self.alt_max)
        return math.hypot(horiz, vert)
