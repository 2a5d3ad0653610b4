import math

import numpy as np
import pytest

from moviemap.fixtures import (
    FixtureSpec,
    build_fixture,
    fixture_trajectories,
    frame_sources,
)
from moviemap.geometry import Rect, rects_overlap
from moviemap.intersect import (
    ChunkRect,
    DetectionParams,
    IntersectionRecord,
    SearchStats,
    decompose_rects,
    detect_all,
    extend_endpoints,
    find_overlapping_pairs,
    nearest_frame_pair,
    refine_visual,
)
from moviemap.register import register_area, register_trajectory
from moviemap.scoring import ArrayFrameSource, PatchCorrelationScorer

from conftest import NO_REFINE, brute_force_nearest, make_traj, polyline_points


def reg_from_points(video_id, points, street_id="s", direction="forward"):
    return register_trajectory(make_traj(video_id, points, street_id=street_id, direction=direction))


def random_walk_reg(seed=0, n=250):
    rng = np.random.default_rng(seed)
    pts = np.cumsum(rng.normal(0, 1.0, size=(n, 2)), axis=0)
    if np.hypot(*(pts[-1] - pts[0])) < 1e-3:
        pts[-1] += 5.0
    return reg_from_points("walk", pts)


# --- decompose_rects ---------------------------------------------------------


def test_decompose_250_poses_into_three_chunks():
    reg = reg_from_points("v", np.column_stack([np.linspace(0, 124.5, 250), np.zeros(250)]))
    rects = decompose_rects(reg, chunk_len=100, pad_m=3.0)
    assert [r.pose_range for r in rects] == [(0, 99), (100, 199), (200, 249)]
    assert [r.chunk_index for r in rects] == [0, 1, 2]
    assert not any(r.extended for r in rects)


def test_decompose_straight_path_zero_pad_has_flat_rects():
    reg = reg_from_points("v", np.column_stack([np.linspace(0, 50, 101), np.zeros(101)]))
    for rect in decompose_rects(reg, chunk_len=25, pad_m=0.0):
        assert rect.bounds.max_y - rect.bounds.min_y < 1e-9


def test_decompose_random_walk_contains_every_position():
    reg = random_walk_reg(seed=12)
    rects = decompose_rects(reg, chunk_len=64, pad_m=1.5)
    for rect in rects:
        first, last = rect.pose_range
        for pose in range(first, last + 1):
            assert rect.bounds.contains(*reg.positions[pose])


def test_decompose_validates_params():
    reg = random_walk_reg()
    with pytest.raises(ValueError):
        decompose_rects(reg, chunk_len=1)
    with pytest.raises(ValueError):
        decompose_rects(reg, pad_m=-1.0)


# --- extend_endpoints --------------------------------------------------------


def test_extension_protrudes_past_endpoint_along_bearing():
    reg = reg_from_points("v", np.column_stack([np.linspace(0, 100, 201), np.zeros(201)]))
    start_ext, end_ext = extend_endpoints(reg, ext_len=50, pad_m=0.0)
    assert start_ext.extended and end_ext.extended
    assert (start_ext.chunk_index, end_ext.chunk_index) == (-1, -2)
    # path runs east; the start extension reaches west of x=0, the end east of x=100
    assert start_ext.bounds.min_x < -20.0
    assert end_ext.bounds.max_x > 120.0


def test_extension_flips_overlap_at_t_junction_gap():
    # Stem ends 2 m short of the top street; tiny padding so only the
    # extension can bridge the gap.
    top = reg_from_points("top_f", polyline_points([(-30, 0), (30, 0)], 0.5), street_id="top")
    stem = reg_from_points("stem_f", polyline_points([(0, -30), (0, -2)], 0.5), street_id="stem")
    pad = 0.5
    top_chunks = decompose_rects(top, pad_m=pad)
    stem_chunks = decompose_rects(stem, pad_m=pad)
    assert find_overlapping_pairs(top_chunks, stem_chunks) == []
    stem_all = stem_chunks + extend_endpoints(stem, ext_len=200, pad_m=pad)
    assert find_overlapping_pairs(top_chunks, stem_all) != []


def test_extension_clamps_to_short_paths():
    reg = reg_from_points("v", np.column_stack([np.linspace(0, 5, 11), np.zeros(11)]))
    start_ext, end_ext = extend_endpoints(reg, ext_len=200, pad_m=1.0)
    assert start_ext.pose_range == (0, 10)
    assert end_ext.pose_range == (0, 10)


# --- find_overlapping_pairs --------------------------------------------------


def test_disjoint_parallel_streets_have_no_overlaps():
    a = reg_from_points("a", np.column_stack([np.linspace(0, 100, 201), np.zeros(201)]))
    b = reg_from_points("b", np.column_stack([np.linspace(0, 100, 201), np.full(201, 50.0)]))
    assert find_overlapping_pairs(decompose_rects(a, pad_m=3.0), decompose_rects(b, pad_m=3.0)) == []


def brute_overlaps(rects_a, rects_b):
    return [
        (ra.chunk_index, rb.chunk_index)
        for ra in rects_a
        for rb in rects_b
        if rects_overlap(ra.bounds, rb.bounds)
    ]


def test_perpendicular_crossing_contains_crossing_chunks():
    a = reg_from_points("a", polyline_points([(-60, 0), (60, 0)], 0.5))
    b = reg_from_points("b", polyline_points([(0, -60), (0, 60)], 0.5))
    ra = decompose_rects(a, pad_m=3.0)
    rb = decompose_rects(b, pad_m=3.0)
    pairs = find_overlapping_pairs(ra, rb)
    assert pairs == brute_overlaps(ra, rb)
    # pose 120 (x=0 / y=0) lives in chunk 1 of each trajectory
    assert (1, 1) in pairs


def test_overlap_on_identical_lists_matches_brute_force():
    reg = random_walk_reg(seed=5)
    rects = decompose_rects(reg, chunk_len=50, pad_m=2.0)
    assert find_overlapping_pairs(rects, rects) == brute_overlaps(rects, rects)


# --- nearest_frame_pair ------------------------------------------------------


def crossing_candidates(reg_a, reg_b, pad=3.0):
    ra = decompose_rects(reg_a, pad_m=pad) + extend_endpoints(reg_a, pad_m=pad)
    rb = decompose_rects(reg_b, pad_m=pad) + extend_endpoints(reg_b, pad_m=pad)
    index_a = {r.chunk_index: r for r in ra}
    index_b = {r.chunk_index: r for r in rb}
    return [(index_a[i], index_b[j]) for i, j in find_overlapping_pairs(ra, rb)]


def test_nearest_finds_exact_shared_position():
    a = reg_from_points("a", polyline_points([(-30, 0), (30, 0)], 0.5))
    b = reg_from_points("b", polyline_points([(0, -30), (0, 30)], 0.5))
    pa, pb, dist = nearest_frame_pair(a, b, crossing_candidates(a, b))
    assert dist == 0.0
    assert np.allclose(a.positions[pa], (0, 0))
    assert np.allclose(b.positions[pb], (0, 0))


def test_nearest_equals_exhaustive_search_with_noise():
    world = build_fixture(FixtureSpec(layout="cross", seed=13, noise_m=0.5, street_length_m=80.0))
    regs = {r.video_id: r for r in register_area(fixture_trajectories(world))}
    a, b = regs["ew_f"], regs["ns_b"]
    pa, pb, dist = nearest_frame_pair(a, b, crossing_candidates(a, b))
    bi, bj, bd = brute_force_nearest(a.positions, b.positions)
    assert (pa, pb) == (bi, bj)
    assert dist == pytest.approx(bd)


def test_nearest_tie_breaks_lexicographically():
    # Two separate exact-contact points; the lexicographically first pair wins.
    a = reg_from_points("a", polyline_points([(0, 0), (40, 0)], 1.0))
    b = reg_from_points("b", polyline_points([(10, 0), (10, -40), (30, -40), (30, 0)], 1.0))
    candidates = crossing_candidates(a, b, pad=2.0)
    pa, pb, dist = nearest_frame_pair(a, b, candidates)
    assert dist == 0.0
    assert (pa, pb) == (10, 0)  # contact at x=10 beats contact at x=30


def test_nearest_requires_candidates():
    a = reg_from_points("a", polyline_points([(0, 0), (10, 0)], 1.0))
    with pytest.raises(ValueError):
        nearest_frame_pair(a, a, [])


def test_stats_count_distance_evaluations():
    # Long enough that the endpoint extensions cover only a small part of
    # each path, so pruning beats brute force.
    a = reg_from_points("a", polyline_points([(-150, 0), (150, 0)], 0.5))
    b = reg_from_points("b", polyline_points([(0, -150), (0, 150)], 0.5))
    stats = SearchStats()
    nearest_frame_pair(a, b, crossing_candidates(a, b), stats)
    assert 0 < stats.distance_evals < len(a.positions) * len(b.positions)


# --- refine_visual -----------------------------------------------------------


@pytest.fixture(scope="module")
def cross_refine(cross_world=None):
    world = build_fixture(FixtureSpec(layout="cross", seed=3, street_length_m=40.0))
    regs = {r.video_id: r for r in register_area(fixture_trajectories(world))}
    pair = next(
        p
        for c in world.ground_truth["crossings"]
        for p in c["pairs"]
        if (p["video_a"], p["video_b"]) == ("ew_f", "ns_f")
    )
    return world, regs, pair


def test_refine_window_zero_returns_seed(cross_refine):
    world, regs, pair = cross_refine
    fs = frame_sources(world)
    seed = (pair["pose_a"] + 3, pair["pose_b"] - 2)
    pa, pb, _ = refine_visual(
        fs["ew_f"], fs["ns_f"], seed, regs["ew_f"], regs["ns_f"], window=0,
        scorer=PatchCorrelationScorer(),
    )
    assert (pa, pb) == seed


def test_refine_recovers_identical_viewpoint(cross_refine):
    world, regs, pair = cross_refine
    fs = frame_sources(world)
    truth = (pair["pose_a"], pair["pose_b"])
    pa, pb, score = refine_visual(
        fs["ew_f"], fs["ns_f"], truth, regs["ew_f"], regs["ns_f"], window=4,
        scorer=PatchCorrelationScorer(),
    )
    assert (pa, pb) == truth
    assert score == pytest.approx(1.0, abs=1e-6)


def test_refine_recovers_displaced_seed(cross_refine):
    world, regs, pair = cross_refine
    fs = frame_sources(world)
    truth = (pair["pose_a"], pair["pose_b"])
    seed = (truth[0] + 5, truth[1] - 5)
    pa, pb, _ = refine_visual(
        fs["ew_f"], fs["ns_f"], seed, regs["ew_f"], regs["ns_f"], window=7,
        scorer=PatchCorrelationScorer(),
    )
    assert (pa, pb) == truth


def test_refine_missing_frames_raise(cross_refine):
    world, regs, pair = cross_refine
    empty = ArrayFrameSource({})
    with pytest.raises(FileNotFoundError):
        refine_visual(
            empty, empty, (pair["pose_a"], pair["pose_b"]), regs["ew_f"], regs["ns_f"],
            window=1, scorer=PatchCorrelationScorer(),
        )


# --- detect_all --------------------------------------------------------------


def test_parallel_streets_record_only_same_street_pairs():
    world = build_fixture(FixtureSpec(layout="parallel", seed=8, street_length_m=60.0))
    regs = register_area(fixture_trajectories(world))
    result = detect_all(regs, params=NO_REFINE)
    street_of = {r.video_id: r.street_id for r in regs}
    for record in result.records:
        assert street_of[record.video_a] == street_of[record.video_b]
    assert {(r.video_a, r.video_b) for r in result.records} == {
        ("north_b", "north_f"),
        ("south_b", "south_f"),
    }


def test_grid_has_four_records_per_crossing(grid_world, grid_regs):
    result = detect_all(grid_regs, params=NO_REFINE)
    street_of = {r.video_id: r.street_id for r in grid_regs}
    cross_street = [r for r in result.records if street_of[r.video_a] != street_of[r.video_b]]
    by_streets = {}
    for r in cross_street:
        key = tuple(sorted((street_of[r.video_a], street_of[r.video_b])))
        by_streets.setdefault(key, []).append(r)
    assert len(by_streets) == 4  # h0xv0, h0xv1, h1xv0, h1xv1
    assert all(len(v) == 4 for v in by_streets.values())


def test_detect_empty_area():
    result = detect_all([], params=NO_REFINE)
    assert result.records == []


def test_detect_canonical_order_and_symmetry(grid_regs):
    fwd = detect_all(grid_regs, params=NO_REFINE)
    rev = detect_all(list(reversed(grid_regs)), params=NO_REFINE)
    assert [(r.video_a, r.video_b) for r in fwd.records] == [
        (r.video_a, r.video_b) for r in rev.records
    ]
    assert all(r.video_a < r.video_b for r in fwd.records)
    assert fwd.records == rev.records


def test_same_street_relative_yaw_is_pi():
    world = build_fixture(FixtureSpec(layout="straight", seed=9, street_length_m=60.0))
    regs = register_area(fixture_trajectories(world))
    result = detect_all(regs, params=NO_REFINE)
    assert len(result.records) == 1
    assert abs(result.records[0].relative_yaw_rad) == pytest.approx(math.pi, abs=0.1)


def test_multi_crossing_emits_best_plus_warning():
    straight = make_traj("s_f", polyline_points([(-50, 0.3), (50, 0.3)], 0.5), street_id="s")
    u_shape = make_traj(
        "u_f",
        polyline_points([(-20, 30), (-20, -20), (20, -20), (20, 30)], 0.5),
        street_id="u",
    )
    regs = register_area([straight, u_shape])
    result = detect_all(regs, params=NO_REFINE)
    assert len(result.records) == 1
    codes = [w.code for w in result.warnings]
    assert "multi-crossing" in codes
    warning = next(w for w in result.warnings if w.code == "multi-crossing")
    assert set(warning.video_ids) == {"s_f", "u_f"}


def test_single_crossing_does_not_warn(grid_regs):
    result = detect_all(grid_regs, params=NO_REFINE)
    assert [w for w in result.warnings if w.code == "multi-crossing"] == []


def test_detect_with_visual_refinement_marks_records(cross_refine):
    world, regs_map, pair = cross_refine
    regs = list(regs_map.values())
    fs = frame_sources(world)
    params = DetectionParams(refine=True, refine_window=3, scorer=PatchCorrelationScorer())
    result = detect_all(regs, fs, params)
    assert result.records
    assert all(r.refined for r in result.records)
    rec = next(r for r in result.records if (r.video_a, r.video_b) == ("ew_f", "ns_f"))
    assert (rec.pose_a, rec.pose_b) == (pair["pose_a"], pair["pose_b"])


def test_detect_missing_frames_falls_back_to_positional(cross_refine):
    world, regs_map, _ = cross_refine
    regs = list(regs_map.values())
    frames = {vid: ArrayFrameSource({}) for vid in regs_map}
    params = DetectionParams(refine=True, refine_window=2, scorer=PatchCorrelationScorer())
    result = detect_all(regs, frames, params)
    assert result.records
    assert all(not r.refined for r in result.records)
    assert any(w.code == "refine-failed" for w in result.warnings)


def test_record_json_round_trip(grid_records):
    for record in grid_records:
        assert IntersectionRecord.from_json(record.to_json()) == record


def test_record_canonical_order_enforced():
    with pytest.raises(ValueError, match="canonical"):
        IntersectionRecord(
            video_a="z", video_b="a", pose_a=0, pose_b=0, timestamp_a_s=0.0,
            timestamp_b_s=0.0, map_point=(0, 0), relative_yaw_rad=0.0,
            distance_m=0.0, refined=False,
        )


def test_oracle_equivalence_small_sweep():
    # The acceptance suite runs the full 20-seed sweep; keep a small one here.
    for layout in ("cross", "t_junction"):
        for seed in (0, 1):
            world = build_fixture(
                FixtureSpec(layout=layout, seed=seed, noise_m=0.3, street_length_m=50.0)
            )
            regs = register_area(fixture_trajectories(world))
            result = detect_all(regs, params=NO_REFINE)
            by_pair = {(r.video_a, r.video_b): r for r in result.records}
            reg_map = {r.video_id: r for r in regs}
            for (va, vb), rec in by_pair.items():
                bi, bj, bd = brute_force_nearest(reg_map[va].positions, reg_map[vb].positions)
                assert (rec.pose_a, rec.pose_b) == (bi, bj), (layout, seed, va, vb)
