import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crossview_pf.geo import (
    GeoCoordinate,
    LocalFrame,
    Position2,
    TimedPose,
    check_increasing,
    geo_to_local,
    local_to_geo,
    position_error,
)

ORIGIN = LocalFrame(GeoCoordinate(0.0, 0.0))
finite = st.floats(-1e5, 1e5, allow_nan=False)


def test_origin_maps_to_zero():
    p = geo_to_local(ORIGIN, GeoCoordinate(0.0, 0.0))
    assert (p.x, p.y) == (0.0, 0.0)


def test_northward_millidegree():
    p = geo_to_local(ORIGIN, GeoCoordinate(0.001, 0.0))
    assert p.x == 0.0
    assert p.y == pytest.approx(111.31949079327357, abs=1e-9)


def test_longitude_scaled_by_cos_latitude():
    equator = geo_to_local(ORIGIN, GeoCoordinate(0.0, 0.001))
    sixty = geo_to_local(LocalFrame(GeoCoordinate(60.0, 0.0)), GeoCoordinate(60.0, 0.001))
    assert sixty.x == pytest.approx(equator.x / 2, rel=1e-12)
    assert sixty.x == pytest.approx(55.65974539663681, abs=1e-9)


def test_local_origin_is_frame_origin():
    frame = LocalFrame(GeoCoordinate(-33.86, 151.2))
    g = local_to_geo(frame, Position2(0.0, 0.0))
    assert (g.lat, g.lon) == (-33.86, 151.2)


def test_round_trip_in_10km_box():
    frame = LocalFrame(GeoCoordinate(-33.86, 151.2))
    rng = np.random.default_rng(4)
    for dx, dy in rng.uniform(-5000, 5000, size=(100, 2)):
        g = local_to_geo(frame, Position2(dx, dy))
        back = geo_to_local(frame, g)
        assert position_error(back, Position2(dx, dy)) < 1e-6
        again = local_to_geo(frame, back)
        assert abs(again.lat - g.lat) < 1e-9 and abs(again.lon - g.lon) < 1e-9


def test_round_trip_over_50km_span():
    frame = LocalFrame(GeoCoordinate(47.0, 8.0))
    for x, y in [(25000, 25000), (-25000, 25000), (25000, -25000), (-25000, -25000)]:
        assert position_error(geo_to_local(frame, local_to_geo(frame, Position2(x, y))), Position2(x, y)) < 1e-6


def test_position_error_345():
    assert position_error(Position2(0, 0), Position2(0, 0)) == 0.0
    assert position_error(Position2(0, 0), Position2(3, 4)) == 5.0


@given(finite, finite, finite, finite)
def test_position_error_symmetric(ax, ay, bx, by):
    a, b = Position2(ax, ay), Position2(bx, by)
    assert position_error(a, b) == position_error(b, a) >= 0


@given(finite, finite, finite, finite, finite, finite)
def test_position_error_triangle(ax, ay, bx, by, cx, cy):
    a, b, c = Position2(ax, ay), Position2(bx, by), Position2(cx, cy)
    assert position_error(a, c) <= position_error(a, b) + position_error(b, c) + 1e-9


@pytest.mark.parametrize("lat,lon", [(91, 0), (-90.5, 0), (0, 180.1), (0, -181)])
def test_geo_range_rejected(lat, lon):
    with pytest.raises(ValueError):
        GeoCoordinate(lat, lon)


def test_nonfinite_position_rejected():
    with pytest.raises(ValueError):
        Position2(math.nan, 0.0)
    with pytest.raises(ValueError):
        Position2(0.0, math.inf)


def test_trajectory_must_increase():
    poses = [TimedPose(0.0, Position2(0, 0)), TimedPose(1.0, Position2(1, 0)), TimedPose(1.0, Position2(2, 0))]
    with pytest.raises(ValueError):
        check_increasing(poses)
    check_increasing(poses[:2])
