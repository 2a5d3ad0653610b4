import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moviemap.fixtures import FixtureSpec, build_fixture, write_fixture
from moviemap.trajectory import (
    GEO_MODE_LATLNG,
    GEO_MODE_LOCAL,
    GeoRef,
    MapPoint,
    TrajectoryParseError,
    VideoTrajectory,
    latlng_to_local,
    local_to_latlng,
    parse_trajectory,
    serialize_trajectory,
)

REF_KW = dict(
    street_id="s",
    direction="forward",
    ref_start=MapPoint(0.0, 0.0),
    ref_end=MapPoint(10.0, 0.0),
    frame_rate_hz=30.0,
)


def lines(*objs) -> bytes:
    return ("\n".join(json.dumps(o) for o in objs) + "\n").encode()


def test_parse_minimal_two_lines():
    data = lines(
        {"frame": 0, "t": 0.0, "pos": [0, 0, 0], "yaw": 0},
        {"frame": 30, "t": 1.0, "pos": [1, 0, 0], "yaw": 0},
    )
    traj = parse_trajectory(data, "v1", **REF_KW)
    assert traj.n_poses == 2
    assert traj.poses[0].frame_index == 0
    assert traj.poses[1].timestamp_s == 1.0
    assert traj.poses[1].position == (1.0, 0.0, 0.0)


def test_parse_rejects_non_monotonic_frames():
    data = lines(
        {"frame": 5, "t": 0.0, "pos": [0, 0, 0], "yaw": 0},
        {"frame": 3, "t": 1.0, "pos": [1, 0, 0], "yaw": 0},
    )
    with pytest.raises(TrajectoryParseError, match="line 2.*strictly increasing"):
        parse_trajectory(data, "v1", **REF_KW)


def test_parse_rejects_decreasing_timestamps():
    data = lines(
        {"frame": 0, "t": 2.0, "pos": [0, 0, 0], "yaw": 0},
        {"frame": 1, "t": 1.0, "pos": [1, 0, 0], "yaw": 0},
    )
    with pytest.raises(TrajectoryParseError, match="decreasing"):
        parse_trajectory(data, "v1", **REF_KW)


def test_parse_reports_line_number_of_malformed_json():
    data = b'{"frame": 0, "t": 0.0, "pos": [0,0,0], "yaw": 0}\nnot json\n'
    with pytest.raises(TrajectoryParseError, match="line 2"):
        parse_trajectory(data, "v1", **REF_KW)


def test_parse_rejects_missing_key_and_bad_pos():
    with pytest.raises(TrajectoryParseError, match="line 1"):
        parse_trajectory(lines({"frame": 0, "t": 0.0, "yaw": 0}), "v1", **REF_KW)
    with pytest.raises(TrajectoryParseError, match="3 numbers"):
        parse_trajectory(lines({"frame": 0, "t": 0.0, "pos": [1, 2], "yaw": 0}), "v1", **REF_KW)


def test_parse_requires_two_poses():
    with pytest.raises(TrajectoryParseError, match="at least 2"):
        parse_trajectory(lines({"frame": 0, "t": 0.0, "pos": [0, 0, 0], "yaw": 0}), "v1", **REF_KW)


def test_parse_skips_blank_lines():
    data = b'{"frame": 0, "t": 0.0, "pos": [0,0,0], "yaw": 0}\n\n{"frame": 1, "t": 0.5, "pos": [1,0,0], "yaw": 0}\n'
    assert parse_trajectory(data, "v1", **REF_KW).n_poses == 2


def test_parse_normalizes_out_of_range_yaw():
    data = lines(
        {"frame": 0, "t": 0.0, "pos": [0, 0, 0], "yaw": 3 * math.pi},
        {"frame": 1, "t": 0.5, "pos": [1, 0, 0], "yaw": -math.pi},
    )
    traj = parse_trajectory(data, "v1", **REF_KW)
    assert traj.poses[0].yaw_rad == pytest.approx(-math.pi)
    assert traj.poses[1].yaw_rad == -math.pi


def test_fixture_file_round_trips_bit_exact(tmp_path):
    # 241-keyframe synthetic file written by the fixture generator.
    world = build_fixture(FixtureSpec(layout="straight", seed=11, noise_m=0.3))
    write_fixture(world, tmp_path, render_frames=False)
    path = tmp_path / "trajectories" / "main_f.jsonl"
    raw = path.read_bytes()
    traj = parse_trajectory(raw, "main_f", **REF_KW)
    assert traj.n_poses == world.video("main_f").n_poses

    src = world.video("main_f")
    for i, pose in enumerate(traj.poses):
        assert pose.timestamp_s == float(src.timestamps[i])  # bit-exact
        assert pose.position[0] == float(src.local_positions[i, 0])
        assert pose.position[1] == float(src.local_positions[i, 1])
        assert pose.yaw_rad == float(src.local_yaws[i])
    assert serialize_trajectory(traj) == raw


def test_video_trajectory_invariants():
    poses_kw = dict(
        poses=[],
        ref_start=MapPoint(0, 0),
        ref_end=MapPoint(0, 0),
        frame_rate_hz=30.0,
    )
    with pytest.raises(ValueError):
        VideoTrajectory(video_id="v", street_id="s", direction="forward", **poses_kw)
    with pytest.raises(ValueError, match="direction"):
        data = lines(
            {"frame": 0, "t": 0.0, "pos": [0, 0, 0], "yaw": 0},
            {"frame": 1, "t": 0.5, "pos": [1, 0, 0], "yaw": 0},
        )
        parse_trajectory(data, "v1", **{**REF_KW, "direction": "sideways"})


def test_refs_must_differ():
    data = lines(
        {"frame": 0, "t": 0.0, "pos": [0, 0, 0], "yaw": 0},
        {"frame": 1, "t": 0.5, "pos": [1, 0, 0], "yaw": 0},
    )
    with pytest.raises(ValueError, match="differ"):
        parse_trajectory(data, "v1", **{**REF_KW, "ref_end": MapPoint(0.0, 0.0)})


GEO = GeoRef(mode=GEO_MODE_LATLNG, origin_lat_deg=35.0, origin_lng_deg=135.0)


def test_latlng_origin_maps_to_zero():
    p = latlng_to_local(35.0, 135.0, GEO)
    assert (p.x_m, p.y_m) == (0.0, 0.0)


def test_latlng_derived_meridian_value():
    # 1e-3 deg of longitude at the equator: 1e-3 * pi/180 * 6378137 m.
    geo = GeoRef(mode=GEO_MODE_LATLNG, origin_lat_deg=0.0, origin_lng_deg=20.0)
    p = latlng_to_local(0.0, 20.0 + 1e-3, geo)
    assert p.x_m == pytest.approx(111.31949079327357, abs=1e-6)
    assert p.y_m == 0.0


@pytest.mark.parametrize("origin_lat", [0.0, 35.0, -48.0])
def test_latlng_northing_independent_of_origin_latitude(origin_lat):
    geo = GeoRef(mode=GEO_MODE_LATLNG, origin_lat_deg=origin_lat, origin_lng_deg=10.0)
    p = latlng_to_local(origin_lat + 1e-3, 10.0, geo)
    assert p.y_m == pytest.approx(111.31949079327357, abs=1e-6)
    assert p.x_m == 0.0


def test_latlng_requires_matching_mode():
    with pytest.raises(ValueError, match="mode"):
        latlng_to_local(35.0, 135.0, GeoRef(mode=GEO_MODE_LOCAL))


# Dyadic offsets (multiples of 2^-20 deg, ~+-0.05 deg) are exactly
# representable added to the origin, so midpoints of inputs are exact and the
# property tests the mapping, not float noise in the test's own arithmetic.
coords = st.integers(min_value=-50000, max_value=50000).map(lambda k: k * 2.0**-20)


@given(coords, coords, coords, coords)
def test_latlng_projection_is_affine(lat1, lng1, lat2, lng2):
    # Mapping of midpoints equals midpoint of mappings, to 1e-9 m.
    la, ga = 35.0 + lat1, 135.0 + lng1
    lb, gb = 35.0 + lat2, 135.0 + lng2
    a = latlng_to_local(la, ga, GEO)
    b = latlng_to_local(lb, gb, GEO)
    mid = latlng_to_local((la + lb) / 2, (ga + gb) / 2, GEO)
    assert mid.x_m == pytest.approx((a.x_m + b.x_m) / 2, abs=1e-9)
    assert mid.y_m == pytest.approx((a.y_m + b.y_m) / 2, abs=1e-9)


@given(st.floats(min_value=-2000, max_value=2000), st.floats(min_value=-2000, max_value=2000))
def test_latlng_inverse_round_trip(x, y):
    lat, lng = local_to_latlng(MapPoint(x, y), GEO)
    p = latlng_to_local(lat, lng, GEO)
    assert p.x_m == pytest.approx(x, abs=1e-6)
    assert p.y_m == pytest.approx(y, abs=1e-6)


def test_geo_ref_origin_validation():
    with pytest.raises(ValueError):
        GeoRef(mode=GEO_MODE_LATLNG)
    with pytest.raises(ValueError):
        GeoRef(mode=GEO_MODE_LOCAL, origin_lat_deg=1.0, origin_lng_deg=2.0)


def test_map_point_rejects_non_finite():
    with pytest.raises(ValueError):
        MapPoint(float("nan"), 0.0)
    with pytest.raises(ValueError):
        MapPoint(0.0, float("inf"))
