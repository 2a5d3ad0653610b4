import json

import numpy as np
import pytest

from moviemap.area import load_area_config, load_trajectories, validate_area
from moviemap.fixtures import FixtureSpec, build_fixture, fixture_trajectories, write_fixture
from moviemap.trajectory import GEO_MODE_LATLNG

from conftest import make_traj, polyline_points


def test_load_fixture_area_config(tmp_path):
    world = build_fixture(FixtureSpec(layout="cross", seed=1))
    write_fixture(world, tmp_path, render_frames=False)
    cfg = load_area_config(tmp_path / "area.json")
    assert cfg.area_name == "fixture-cross-1"
    assert len(cfg.videos) == 4
    assert {v.direction for v in cfg.videos} == {"forward", "backward"}
    assert len(cfg.landmarks) == 2
    assert len(cfg.billboards) == 1
    trajs = load_trajectories(cfg)
    assert [t.video_id for t in trajs] == [v.video_id for v in cfg.videos]
    # loaded trajectories match the in-memory world bit-exact
    src = world.video(trajs[0].video_id)
    assert trajs[0].n_poses == src.n_poses
    assert trajs[0].poses[5].position[0] == float(src.local_positions[5, 0])


def test_latlng_config_round_trips_refs(tmp_path):
    world = build_fixture(FixtureSpec(layout="cross", seed=2, geo_mode=GEO_MODE_LATLNG))
    write_fixture(world, tmp_path, render_frames=False)
    cfg = load_area_config(tmp_path / "area.json")
    assert cfg.geo_ref.mode == GEO_MODE_LATLNG
    traj = load_trajectories(cfg)[0]
    src = world.video(traj.video_id)
    assert traj.ref_start.x_m == pytest.approx(src.map_positions[0, 0], abs=1e-6)
    assert traj.ref_start.y_m == pytest.approx(src.map_positions[0, 1], abs=1e-6)


def test_duplicate_street_direction_rejected(tmp_path):
    world = build_fixture(FixtureSpec(layout="straight", seed=3))
    write_fixture(world, tmp_path, render_frames=False)
    raw = json.loads((tmp_path / "area.json").read_text())
    raw["videos"].append(dict(raw["videos"][0], video_id="dup"))
    (tmp_path / "area.json").write_text(json.dumps(raw))
    with pytest.raises(ValueError, match="duplicate capture"):
        load_area_config(tmp_path / "area.json")


def test_two_directions_of_straight_street_no_warnings():
    world = build_fixture(FixtureSpec(layout="straight", seed=4))
    assert validate_area(fixture_trajectories(world)) == []


def test_single_direction_street_warns():
    world = build_fixture(FixtureSpec(layout="straight", seed=5))
    trajs = [t for t in fixture_trajectories(world) if t.direction == "forward"]
    warnings = validate_area(trajs)
    assert [w.code for w in warnings] == ["missing-direction"]
    assert "backward" in warnings[0].message


def test_u_shaped_path_crossing_twice_warns():
    straight = make_traj(
        "straight_f", polyline_points([(-50, 0), (50, 0)], 1.0), street_id="straight"
    )
    u_shape = make_traj(
        "u_f",
        polyline_points([(-20, 30), (-20, -20), (20, -20), (20, 30)], 1.0),
        street_id="u",
    )
    warnings = validate_area([straight, u_shape])
    multi = [w for w in warnings if w.code == "multi-crossing"]
    assert len(multi) == 1
    assert set(multi[0].video_ids) == {"straight_f", "u_f"}


def test_single_crossing_does_not_warn():
    a = make_traj("a_f", polyline_points([(-30, 0), (30, 0)], 1.0), street_id="a")
    b = make_traj("b_f", polyline_points([(0.3, -30), (0.3, 30)], 1.0), street_id="b")
    assert [w.code for w in validate_area([a, b])] == ["missing-direction", "missing-direction"]
