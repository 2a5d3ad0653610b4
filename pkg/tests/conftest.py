"""Shared fixtures and independent oracles for the test suite."""
from __future__ import annotations

import math

import numpy as np
import pytest

from moviemap.assemble import assemble_area
from moviemap.fixtures import FixtureSpec, build_fixture, fixture_trajectories, frame_sources
from moviemap.intersect import DetectionParams, detect_all
from moviemap.register import register_area
from moviemap.trajectory import KeyframePose, MapPoint, VideoTrajectory


def brute_force_nearest(pa: np.ndarray, pb: np.ndarray, row_block: int = 512):
    """Exhaustive nearest pose pair over ALL pairs; the pruning oracle.

    Ties resolve to the smallest (i, j) lexicographically, like the code
    under test. Row-blocked to bound memory on large trajectories.
    """
    best = None
    for i0 in range(0, len(pa), row_block):
        block = pa[i0 : i0 + row_block]
        d2 = ((block[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2)
        flat = int(np.argmin(d2))
        bi, bj = divmod(flat, d2.shape[1])
        cand = (float(d2[bi, bj]), i0 + bi, bj)
        if best is None or cand < best:
            best = cand
    return best[1], best[2], math.sqrt(best[0])


def polyline_points(waypoints, spacing: float) -> np.ndarray:
    """Sample points along a waypoint chain at a fixed spacing."""
    pts = [np.asarray(waypoints[0], dtype=float)]
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        length = float(np.hypot(*(b - a)))
        n = max(1, int(round(length / spacing)))
        for k in range(1, n + 1):
            pts.append(a + (b - a) * k / n)
    return np.array(pts)


def make_traj(
    video_id: str,
    points: np.ndarray,
    street_id: str = "s",
    direction: str = "forward",
    frame_rate_hz: float = 30.0,
    ref_start=None,
    ref_end=None,
) -> VideoTrajectory:
    """A trajectory whose local frame IS the map frame (identity transform)."""
    points = np.asarray(points, dtype=float)
    deltas = np.diff(points, axis=0)
    yaws = np.arctan2(deltas[:, 1], deltas[:, 0])
    yaws = np.append(yaws, yaws[-1])
    poses = [
        KeyframePose(
            frame_index=i * 10,
            timestamp_s=i / 3.0,
            position=(float(points[i, 0]), float(points[i, 1]), 0.0),
            yaw_rad=float((yaws[i] + math.pi) % (2 * math.pi) - math.pi),
        )
        for i in range(len(points))
    ]
    return VideoTrajectory(
        video_id=video_id,
        street_id=street_id,
        direction=direction,
        poses=poses,
        ref_start=MapPoint(*ref_start) if ref_start else MapPoint(float(points[0, 0]), float(points[0, 1])),
        ref_end=MapPoint(*ref_end) if ref_end else MapPoint(float(points[-1, 0]), float(points[-1, 1])),
        frame_rate_hz=frame_rate_hz,
    )


NO_REFINE = DetectionParams(refine=False)


@pytest.fixture(scope="session")
def cross_world():
    return build_fixture(FixtureSpec(layout="cross", seed=3, street_length_m=40.0))


@pytest.fixture(scope="session")
def cross_frames(cross_world):
    return frame_sources(cross_world)


@pytest.fixture(scope="session")
def cross_regs(cross_world):
    return register_area(fixture_trajectories(cross_world))


@pytest.fixture(scope="session")
def grid_world():
    # Small enough for unit tests; the acceptance suite uses the full size.
    return build_fixture(FixtureSpec(layout="grid2x2", seed=7, street_length_m=60.0, frame_size=(128, 64)))


@pytest.fixture(scope="session")
def grid_regs(grid_world):
    return register_area(fixture_trajectories(grid_world))


@pytest.fixture(scope="session")
def grid_records(grid_regs):
    return detect_all(grid_regs, params=NO_REFINE).records


@pytest.fixture(scope="session")
def grid_assembled(grid_regs, grid_records):
    return assemble_area(grid_regs, grid_records)


@pytest.fixture(scope="session")
def t_world():
    return build_fixture(FixtureSpec(layout="t_junction", seed=5, street_length_m=60.0))


@pytest.fixture(scope="session")
def t_assembled(t_world):
    regs = register_area(fixture_trajectories(t_world))
    records = detect_all(regs, params=NO_REFINE).records
    return assemble_area(regs, records)


@pytest.fixture(scope="session")
def grid_fixture_dir(tmp_path_factory, grid_world):
    from moviemap.fixtures import write_fixture

    out = tmp_path_factory.mktemp("grid_fixture")
    write_fixture(grid_world, out, render_frames=True)
    return out


def write_turn_assets(assembled, frames, out_dir, n_frames=6):
    """Synthesize and write the turn tree the way `mm turns` does."""
    import json

    from PIL import Image

    from moviemap.turning import TurnMethod, precompute_turns

    out_dir.mkdir(parents=True, exist_ok=True)
    index = {"method": "C", "n_frames": n_frames, "assets": []}
    for asset in precompute_turns(assembled, frames, n_frames, TurnMethod.BLEND_ROTATE):
        t = asset.triple
        asset_dir = out_dir / t.node_id / f"{t.from_section}__{t.to_section}"
        asset_dir.mkdir(parents=True, exist_ok=True)
        for k, frame in enumerate(asset.frames):
            Image.fromarray(frame.pixels).save(asset_dir / f"{k:04d}.png", compress_level=3)
        index["assets"].append(
            {"node_id": t.node_id, "from_section": t.from_section, "to_section": t.to_section}
        )
    (out_dir / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True))
    return out_dir


@pytest.fixture(scope="session")
def grid_turns_dir(tmp_path_factory, grid_world, grid_assembled):
    out = tmp_path_factory.mktemp("grid_turns")
    return write_turn_assets(grid_assembled, frame_sources(grid_world), out)


@pytest.fixture(scope="session")
def grid_package_dir(tmp_path_factory, grid_world, grid_regs, grid_assembled, grid_fixture_dir, grid_turns_dir):
    from moviemap.store import export_package
    from moviemap.turning import TurnMethod

    out = tmp_path_factory.mktemp("grid_pkg") / "pkg"
    export_package(
        out,
        area_name=grid_world.area_name,
        geo_ref=grid_world.geo_ref,
        assembled=grid_assembled,
        registered=grid_regs,
        frame_dirs={vid: grid_fixture_dir / "frames" / vid for vid in grid_assembled.videos},
        turns_dir=grid_turns_dir,
        landmarks=grid_world.landmarks,
        billboards=grid_world.billboards,
        turn_method=TurnMethod.BLEND_ROTATE,
        turn_frames=6,
    )
    return out
