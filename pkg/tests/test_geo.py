import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aerial_twin.errors import ConfigurationError
from aerial_twin.geo import (EnuVector, GeoPoint, Geofence, LocalFence, contains, distance_3d, enu_to_geodetic,
                             geodetic_to_enu)

from oracles import meters_per_degree, point_in_polygon

LW = GeoPoint(35.7275, -78.6962, 0.0)


def square_fence(lat0=35.0, lon0=-78.0, side=1.0, alt_min=0.0, alt_max=100.0):
    pts = [GeoPoint(lat0, lon0), GeoPoint(lat0, lon0 + side), GeoPoint(lat0 + side, lon0 + side),
           GeoPoint(lat0 + side, lon0)]
    return Geofence(tuple(pts), alt_min, alt_max)


# -- geodetic_to_enu ---------------------------------------------------------


def test_identity_projects_to_zero():
    assert geodetic_to_enu(LW, LW) == EnuVector(0.0, 0.0, 0.0)


def test_pure_altitude_offset():
    v = geodetic_to_enu(LW, GeoPoint(LW.lat, LW.lon, 30.0))
    assert v == EnuVector(0.0, 0.0, 30.0)


def test_thousandth_degree_north():
    expected = 0.001 * meters_per_degree()  # 111.19 m
    v = geodetic_to_enu(GeoPoint(35.0, -78.0, 0.0), GeoPoint(35.001, -78.0, 0.0))
    assert v.north == pytest.approx(expected, rel=1e-9)
    assert v.north == pytest.approx(111.19, abs=0.01)
    assert v.east == pytest.approx(0.0, abs=1e-9)


def test_east_shrinks_with_latitude():
    v = geodetic_to_enu(GeoPoint(60.0, 0.0), GeoPoint(60.0, 0.001))
    assert v.east == pytest.approx(0.001 * meters_per_degree() * 0.5, rel=1e-9)


lat = st.floats(-60.0, 60.0)
lon = st.floats(-170.0, 170.0)
offset = st.floats(-20_000.0, 20_000.0)


@settings(max_examples=300, deadline=None)
@given(lat, lon, offset, offset, st.floats(-500.0, 500.0))
def test_round_trip_within_20km(olat, olon, de, dn, alt):
    origin = GeoPoint(olat, olon, 0.0)  # altitudes are measured from the origin's ground plane
    if math.hypot(de, dn) > 20_000.0:
        de, dn = de / 2, dn / 2
    p = enu_to_geodetic(origin, EnuVector(de, dn, alt))
    back = enu_to_geodetic(origin, geodetic_to_enu(origin, p))
    assert abs(back.lat - p.lat) <= 1e-9
    assert abs(back.lon - p.lon) <= 1e-9
    assert back.alt == p.alt


def test_geopoint_validation():
    with pytest.raises(ConfigurationError):
        GeoPoint(91.0, 0.0)
    with pytest.raises(ConfigurationError):
        GeoPoint(0.0, 181.0)
    with pytest.raises(ConfigurationError):
        GeoPoint(0.0, 0.0, math.nan)
    with pytest.raises(ConfigurationError):
        EnuVector(math.inf, 0.0, 0.0)


# -- distance_3d ----------------------------------------------------------------


@pytest.mark.parametrize("a, b, d", [
    ((0, 0, 0), (0, 0, 0), 0.0),
    ((0, 0, 0), (3, 4, 0), 5.0),
    ((1, 2, 2), (0, 0, 0), 3.0),
])
def test_distance_examples(a, b, d):
    assert distance_3d(EnuVector(*a), EnuVector(*b)) == d


vec = st.builds(EnuVector, st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))


@given(vec, vec, vec)
def test_triangle_inequality(a, b, c):
    assert distance_3d(a, c) <= distance_3d(a, b) + distance_3d(b, c) + 1e-9


@given(vec, vec)
def test_distance_symmetric_nonnegative(a, b):
    assert distance_3d(a, b) == distance_3d(b, a) >= 0.0


# -- contains ---------------------------------------------------------------------


def test_interior_point_inside():
    assert contains(square_fence(), GeoPoint(35.5, -77.5, 50.0))


def test_far_point_outside():
    f = square_fence(side=0.01)
    assert not contains(f, GeoPoint(35.005 + 0.02, -77.995, 50.0))  # ~2 km north


def test_altitude_band():
    f = square_fence(alt_max=100.0)
    assert contains(f, GeoPoint(35.5, -77.5, 100.0))
    assert not contains(f, GeoPoint(35.5, -77.5, 101.0))
    assert not contains(f, GeoPoint(35.5, -77.5, -1.0))


def test_boundary_counts_as_inside():
    f = square_fence()
    assert contains(f, GeoPoint(35.0, -77.5, 10.0))  # on an edge
    assert contains(f, GeoPoint(35.0, -78.0, 10.0))  # on a vertex


def test_degenerate_polygon_rejected():
    line = (GeoPoint(35.0, -78.0), GeoPoint(35.0, -77.9), GeoPoint(35.0, -77.8))
    with pytest.raises(ConfigurationError):
        Geofence(line, 0.0, 10.0)


def test_self_intersecting_polygon_rejected():
    bowtie = (GeoPoint(0, 0), GeoPoint(1, 1), GeoPoint(1, 0), GeoPoint(0, 1))
    with pytest.raises(ConfigurationError):
        Geofence(bowtie, 0.0, 10.0)


def test_too_few_vertices_and_bad_band():
    with pytest.raises(ConfigurationError):
        Geofence((GeoPoint(0, 0), GeoPoint(1, 1)), 0.0, 10.0)
    with pytest.raises(ConfigurationError):
        square_fence(alt_min=10.0, alt_max=10.0)


# an L-shaped polygon exercises the non-convex path
L_SHAPE = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]


@settings(max_examples=300)
@given(st.floats(-0.5, 2.5), st.floats(-0.5, 2.5), st.integers(0, 5))
def test_contains_invariant_under_rotation_and_matches_oracle(x, y, k):
    rotated = L_SHAPE[k:] + L_SHAPE[:k]
    near_edge = any(abs(x - a) < 1e-7 or abs(y - a) < 1e-7 for a in (0.0, 1.0, 2.0))
    f0 = Geofence(tuple(GeoPoint(b, a) for a, b in L_SHAPE), 0.0, 10.0)
    fk = Geofence(tuple(GeoPoint(b, a) for a, b in rotated), 0.0, 10.0)
    p = GeoPoint(y, x, 5.0)
    assert contains(f0, p) == contains(fk, p)
    if not near_edge:
        assert contains(f0, p) == point_in_polygon(x, y, L_SHAPE)


def test_local_fence_matches_geodetic_fence():
    f = square_fence(lat0=LW.lat - 0.001, lon0=LW.lon - 0.001, side=0.002)
    local = f.localize(LW)
    for de, dn, inside in ((0, 0, True), (300, 0, False), (0, -50, True), (0, 250, False)):
        v = EnuVector(de, dn, 10.0)
        assert local.contains(v) is inside
        assert contains(f, enu_to_geodetic(LW, v)) is inside


def test_distance_outside():
    f = LocalFence([(0, 0), (10, 0), (10, 10), (0, 10)], 0.0, 50.0)
    assert f.distance_outside(EnuVector(5, 5, 5)) == 0.0
    assert f.distance_outside(EnuVector(13, 5, 5)) == pytest.approx(3.0)
    assert f.distance_outside(EnuVector(13, 14, 5)) == pytest.approx(5.0)
    assert f.distance_outside(EnuVector(5, 5, 53)) == pytest.approx(3.0)
    assert f.centroid().east == pytest.approx(5.0)
