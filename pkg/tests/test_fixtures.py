import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest

from moviemap.fixtures import (
    FixtureSpec,
    build_fixture,
    fixture_trajectories,
    frame_sources,
    generate,
)
from moviemap.geometry import equirect_column_shift
from moviemap.render import render_equirect

from conftest import brute_force_nearest


def test_grid_ground_truth_counts():
    world = build_fixture(FixtureSpec(layout="grid2x2", seed=7))
    assert len(world.videos) == 8
    gt = world.ground_truth
    assert gt["node_count"] == 4
    assert all(len(c["pairs"]) == 4 for c in gt["crossings"])
    assert sorted(gt["section_counts"].values()) == [3] * 8


def test_cross_noise_free_crossing_has_zero_distance():
    world = build_fixture(FixtureSpec(layout="cross", seed=0, noise_m=0.0))
    (crossing,) = world.ground_truth["crossings"]
    assert crossing["position"] == pytest.approx((0.0, 0.0))
    assert all(p["distance_m"] == 0.0 for p in crossing["pairs"])


def test_ground_truth_pairs_match_independent_brute_force():
    # sanity of the oracle itself
    world = build_fixture(FixtureSpec(layout="t_junction", seed=2, noise_m=0.4))
    by_id = {v.video_id: v for v in world.videos}
    for crossing in world.ground_truth["crossings"]:
        for pair in crossing["pairs"]:
            i, j, dist = brute_force_nearest(
                by_id[pair["video_a"]].map_positions, by_id[pair["video_b"]].map_positions
            )
            assert (i, j) == (pair["pose_a"], pair["pose_b"])
            assert dist == pytest.approx(pair["distance_m"])


def test_layout_validation():
    with pytest.raises(ValueError, match="layout"):
        FixtureSpec(layout="spiral")
    with pytest.raises(ValueError, match="2:1"):
        FixtureSpec(layout="cross", frame_size=(100, 100))


def test_trajectory_density_configurable():
    dense = build_fixture(FixtureSpec(layout="straight", seed=1, keyframe_spacing_m=0.25))
    sparse = build_fixture(FixtureSpec(layout="straight", seed=1, keyframe_spacing_m=1.0))
    assert dense.videos[0].n_poses == pytest.approx(4 * (sparse.videos[0].n_poses - 1) + 1)


def test_hidden_transforms_differ_per_video():
    world = build_fixture(FixtureSpec(layout="cross", seed=3))
    rotations = {v.hidden.rotation_rad for v in world.videos}
    assert len(rotations) == len(world.videos)


def test_timestamps_and_frames_monotone():
    world = build_fixture(FixtureSpec(layout="straight", seed=4))
    v = world.videos[0]
    assert np.all(np.diff(v.frame_indices) > 0)
    assert np.all(np.diff(v.timestamps) > 0)


def _tree_digest(root: Path) -> dict[str, str]:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def test_same_seed_generates_byte_identical_output(tmp_path):
    spec = FixtureSpec(
        layout="cross", seed=9, noise_m=0.2, street_length_m=6.0, frame_size=(64, 32)
    )
    generate(spec, tmp_path / "a")
    generate(spec, tmp_path / "b")
    da, db = _tree_digest(tmp_path / "a"), _tree_digest(tmp_path / "b")
    assert da == db
    assert any(name.endswith(".png") for name in da)
    assert "area.json" in da and "ground_truth.json" in da


def test_generate_without_frames(tmp_path):
    spec = FixtureSpec(layout="straight", seed=1, street_length_m=10.0)
    generate(spec, tmp_path, render_frames=False)
    assert not (tmp_path / "frames").exists()
    assert (tmp_path / "trajectories" / "main_f.jsonl").exists()
    gt = json.loads((tmp_path / "ground_truth.json").read_text())
    assert gt["node_count"] == 0


def test_backward_video_reverses_forward():
    world = build_fixture(FixtureSpec(layout="straight", seed=5, noise_m=0.0))
    fwd = world.video("main_f")
    bwd = world.video("main_b")
    assert np.allclose(fwd.map_positions, bwd.map_positions[::-1])
    assert abs(
        ((fwd.map_yaws[0] - bwd.map_yaws[-1]) + math.pi) % (2 * math.pi) - math.pi
    ) == pytest.approx(math.pi)


# --- renderer ------------------------------------------------------------------


def test_render_shape_and_determinism():
    a = render_equirect(3.0, -2.0, 0.7, 128, 64)
    b = render_equirect(3.0, -2.0, 0.7, 128, 64)
    assert a.shape == (64, 128, 3) and a.dtype == np.uint8
    assert np.array_equal(a, b)
    with pytest.raises(ValueError, match="2:1"):
        render_equirect(0, 0, 0, 100, 60)


def test_render_rotation_equals_column_shift():
    # Rotating the camera by an exact column multiple shifts the image.
    width = 128
    delta = 2 * math.pi * 16 / width
    base = render_equirect(5.0, 7.0, 0.3, width, 64)
    rotated = render_equirect(5.0, 7.0, 0.3 + delta, width, 64)
    shifted = np.roll(base, equirect_column_shift(delta, width), axis=1)
    mismatch = (rotated != shifted).any(axis=2).mean()
    assert mismatch < 0.02  # float noise may flip isolated texture-bin pixels


def test_render_moves_with_camera():
    a = render_equirect(0.0, 0.0, 0.0, 128, 64)
    b = render_equirect(4.0, 0.0, 0.0, 128, 64)
    assert (a != b).any(axis=2).mean() > 0.2


def test_frame_source_caches_and_matches_direct_render(cross_world):
    fs = frame_sources(cross_world)
    video = cross_world.videos[0]
    got = fs[video.video_id].frame(3)
    w, h = cross_world.spec.frame_size
    want = render_equirect(
        float(video.map_positions[3, 0]),
        float(video.map_positions[3, 1]),
        float(video.map_yaws[3]),
        w,
        h,
    )
    assert np.array_equal(got, want)
    assert fs[video.video_id].frame(3) is got  # cached
