"""Deterministic synthetic areas with exact ground truth for every stage.

A fixture lays out streets as line segments, walks each one in both
directions sampling keyframes at a fixed spacing (with optional bounded
noise), hides each video behind a random similarity transform so the
georegistration stage has real work to do, and can render every keyframe's
equirectangular view of the procedural world. Ground truth (true crossing
pose pairs, node and section counts, the hidden transforms) is computed by
construction and brute force, independent of the pipeline under test.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import wrap_angle
from .render import render_equirect
from .store import Billboard
from .trajectory import (
    GEO_MODE_LATLNG,
    GEO_MODE_LOCAL,
    GeoRef,
    KeyframePose,
    Landmark,
    MapPoint,
    VideoTrajectory,
    local_to_latlng,
)

LAYOUTS = ("straight", "cross", "t_junction", "grid2x2", "parallel")

TRUTH_CROSSING_MAX_M = 5.0  # nearest approach closer than this counts as a crossing


@dataclass(frozen=True)
class FixtureSpec:
    layout: str
    keyframe_spacing_m: float = 0.5
    noise_m: float = 0.0
    seed: int = 0
    frame_size: tuple[int, int] = (256, 128)
    street_length_m: float = 120.0
    t_gap_m: float = 2.0
    frame_rate_hz: float = 30.0
    walk_speed_mps: float = 1.5
    geo_mode: str = GEO_MODE_LOCAL

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}, expected one of {LAYOUTS}")
        if self.keyframe_spacing_m <= 0:
            raise ValueError("keyframe_spacing_m must be positive")
        w, h = self.frame_size
        if w != 2 * h:
            raise ValueError(f"frame_size must be 2:1, got {w}x{h}")


@dataclass(frozen=True)
class HiddenTransform:
    """The similarity that was applied inverse-ly to hide a video's map poses."""

    rotation_rad: float
    scale: float
    translation: tuple[float, float]


@dataclass
class FixtureVideo:
    video_id: str
    street_id: str
    direction: str
    map_positions: np.ndarray  # (N, 2) truth map coordinates (noise included)
    map_yaws: np.ndarray  # (N,)
    local_positions: np.ndarray  # (N, 2) what the trajectory file records
    local_yaws: np.ndarray
    frame_indices: np.ndarray  # (N,) int
    timestamps: np.ndarray  # (N,) float seconds
    hidden: HiddenTransform

    @property
    def n_poses(self) -> int:
        return len(self.map_yaws)

    @property
    def duration_s(self) -> float:
        return float(self.timestamps[-1])


@dataclass
class FixtureWorld:
    spec: FixtureSpec
    area_name: str
    geo_ref: GeoRef
    streets: dict[str, tuple[tuple[float, float], tuple[float, float]]]
    videos: list[FixtureVideo]
    landmarks: list[Landmark]
    billboards: list[Billboard]
    ground_truth: dict

    def video(self, video_id: str) -> FixtureVideo:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)


class FixtureFrameSource:
    """Renders (and caches) a fixture video's frames on demand."""

    def __init__(self, video: FixtureVideo, frame_size: tuple[int, int]):
        self._video = video
        self._size = frame_size
        self._cache: dict[int, np.ndarray] = {}

    def frame(self, pose_index: int) -> np.ndarray:
        if pose_index not in self._cache:
            x, y = self._video.map_positions[pose_index]
            yaw = float(self._video.map_yaws[pose_index])
            w, h = self._size
            self._cache[pose_index] = render_equirect(float(x), float(y), yaw, w, h)
        return self._cache[pose_index]


def frame_sources(world: FixtureWorld) -> dict[str, FixtureFrameSource]:
    return {v.video_id: FixtureFrameSource(v, world.spec.frame_size) for v in world.videos}


def fixture_trajectories(world: FixtureWorld) -> list[VideoTrajectory]:
    """The fixture's videos as in-memory trajectories, as parsing would yield them."""
    out = []
    for v in world.videos:
        poses = [
            KeyframePose(
                frame_index=int(v.frame_indices[i]),
                timestamp_s=float(v.timestamps[i]),
                position=(float(v.local_positions[i, 0]), float(v.local_positions[i, 1]), 0.0),
                yaw_rad=float(v.local_yaws[i]),
            )
            for i in range(v.n_poses)
        ]
        out.append(
            VideoTrajectory(
                video_id=v.video_id,
                street_id=v.street_id,
                direction=v.direction,
                poses=poses,
                ref_start=MapPoint(float(v.map_positions[0, 0]), float(v.map_positions[0, 1])),
                ref_end=MapPoint(float(v.map_positions[-1, 0]), float(v.map_positions[-1, 1])),
                frame_rate_hz=world.spec.frame_rate_hz,
            )
        )
    return out


def _street_segments(spec: FixtureSpec) -> dict[str, tuple[tuple[float, float], tuple[float, float]]]:
    half = spec.street_length_m / 2.0
    if spec.layout == "straight":
        return {"main": ((-half, 0.0), (half, 0.0))}
    if spec.layout == "parallel":
        return {
            "north": ((-half, 25.0), (half, 25.0)),
            "south": ((-half, -25.0), (half, -25.0)),
        }
    if spec.layout == "cross":
        return {
            "ew": ((-half, 0.0), (half, 0.0)),
            "ns": ((0.0, -half), (0.0, half)),
        }
    if spec.layout == "t_junction":
        return {
            "top": ((-half, 0.0), (half, 0.0)),
            "stem": ((0.0, -half), (0.0, -spec.t_gap_m)),
        }
    if spec.layout == "grid2x2":
        spacing = spec.street_length_m / 2.0
        lo = -spec.street_length_m / 4.0
        hi = lo + spec.street_length_m
        return {
            "h0": ((lo, 0.0), (hi, 0.0)),
            "h1": ((lo, spacing), (hi, spacing)),
            "v0": ((0.0, lo), (0.0, hi)),
            "v1": ((spacing, lo), (spacing, hi)),
        }
    raise AssertionError(spec.layout)


def _sample_path(start, end, spacing: float) -> np.ndarray:
    length = math.hypot(end[0] - start[0], end[1] - start[1])
    n = int(math.floor(length / spacing + 1e-9)) + 1
    ts = np.arange(n) * spacing / length
    return np.array(start) + ts[:, None] * (np.array(end) - np.array(start))


def _path_yaws(points: np.ndarray) -> np.ndarray:
    deltas = np.diff(points, axis=0)
    yaws = np.arctan2(deltas[:, 1], deltas[:, 0])
    return wrap_angle(np.append(yaws, yaws[-1]))


def _make_video(
    video_id: str,
    street_id: str,
    direction: str,
    truth: np.ndarray,
    spec: FixtureSpec,
    rng: np.random.Generator,
) -> FixtureVideo:
    points = truth.copy() if direction == "forward" else truth[::-1].copy()
    if spec.noise_m > 0:
        points = points + rng.uniform(-spec.noise_m, spec.noise_m, size=points.shape)
    yaws = _path_yaws(points)

    rotation = float(rng.uniform(-math.pi, math.pi))
    scale = float(rng.uniform(0.5, 2.0))
    translation = tuple(rng.uniform(-500.0, 500.0, size=2))
    c, s = math.cos(rotation), math.sin(rotation)
    inv_rot = np.array([[c, s], [-s, c]])  # R(-rotation)
    local = ((points - np.asarray(translation)) / scale) @ inv_rot.T
    local_yaws = wrap_angle(yaws - rotation)

    stride = max(1, round(spec.frame_rate_hz * spec.keyframe_spacing_m / spec.walk_speed_mps))
    frame_indices = np.arange(len(points)) * stride
    timestamps = frame_indices / spec.frame_rate_hz
    return FixtureVideo(
        video_id=video_id,
        street_id=street_id,
        direction=direction,
        map_positions=points,
        map_yaws=yaws,
        local_positions=local,
        local_yaws=local_yaws,
        frame_indices=frame_indices,
        timestamps=timestamps,
        hidden=HiddenTransform(rotation_rad=rotation, scale=scale, translation=translation),
    )


def _brute_force_nearest(pa: np.ndarray, pb: np.ndarray) -> tuple[int, int, float]:
    d2 = ((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2)
    flat = int(np.argmin(d2))
    i, j = divmod(flat, d2.shape[1])
    return i, j, math.sqrt(float(d2[i, j]))


def _ground_truth(spec: FixtureSpec, videos: list[FixtureVideo]) -> dict:
    by_id = {v.video_id: v for v in videos}
    street_of = {v.video_id: v.street_id for v in videos}
    streets = sorted({v.street_id for v in videos})
    crossings = []
    for idx_a in range(len(streets)):
        for idx_b in range(idx_a + 1, len(streets)):
            sa, sb = streets[idx_a], streets[idx_b]
            vids_a = sorted(v.video_id for v in videos if v.street_id == sa)
            vids_b = sorted(v.video_id for v in videos if v.street_id == sb)
            pairs = []
            midpoints = []
            for va in vids_a:
                for vb in vids_b:
                    lo, hi = sorted((va, vb))
                    i, j, dist = _brute_force_nearest(
                        by_id[lo].map_positions, by_id[hi].map_positions
                    )
                    if dist > TRUTH_CROSSING_MAX_M:
                        continue
                    mid = (by_id[lo].map_positions[i] + by_id[hi].map_positions[j]) / 2.0
                    midpoints.append(mid)
                    pairs.append(
                        {
                            "video_a": lo,
                            "video_b": hi,
                            "pose_a": i,
                            "pose_b": j,
                            "distance_m": dist,
                        }
                    )
            if pairs:
                center = np.mean(midpoints, axis=0)
                crossings.append(
                    {
                        "streets": [sa, sb],
                        "position": [float(center[0]), float(center[1])],
                        "pairs": pairs,
                    }
                )

    cut_poses: dict[str, set[int]] = {v.video_id: set() for v in videos}
    for crossing in crossings:
        for pair in crossing["pairs"]:
            cut_poses[pair["video_a"]].add(pair["pose_a"])
            cut_poses[pair["video_b"]].add(pair["pose_b"])
    section_counts = {}
    for v in videos:
        boundaries = sorted(cut_poses[v.video_id] | {0, v.n_poses - 1})
        section_counts[v.video_id] = len(boundaries) - 1

    return {
        "layout": spec.layout,
        "seed": spec.seed,
        "noise_m": spec.noise_m,
        "keyframe_spacing_m": spec.keyframe_spacing_m,
        "crossings": crossings,
        "node_count": len(crossings),
        "section_counts": section_counts,
        "transforms": {
            v.video_id: {
                "rotation_rad": v.hidden.rotation_rad,
                "scale": v.hidden.scale,
                "translation": list(v.hidden.translation),
            }
            for v in videos
        },
    }


def _landmarks(spec: FixtureSpec, streets) -> list[Landmark]:
    first = sorted(streets)[0]
    start = streets[first][0]
    if spec.layout == "grid2x2":
        spacing = spec.street_length_m / 2.0
        second = MapPoint(spacing, spacing)
    elif spec.layout == "parallel":
        second = MapPoint(streets[sorted(streets)[1]][0][0], streets[sorted(streets)[1]][0][1])
    else:
        second = MapPoint(0.0, 0.0)
    return [
        Landmark(name="west-gate", point=MapPoint(start[0], start[1])),
        Landmark(name="plaza", point=second),
    ]


def _billboards(videos: list[FixtureVideo]) -> list[Billboard]:
    host = sorted(videos, key=lambda v: v.video_id)[0]
    anchor = min(10.0, host.duration_s / 2.0)
    return [
        Billboard(
            billboard_id="bb-cafe",
            video_id=host.video_id,
            anchor_timestamp_s=anchor,
            yaw_rad=0.5,
            pitch_rad=0.05,
            title="Fixture Cafe",
            info="Procedurally placed test billboard.",
        )
    ]


def build_fixture(spec: FixtureSpec) -> FixtureWorld:
    """Construct the whole synthetic area in memory."""
    streets = _street_segments(spec)
    videos: list[FixtureVideo] = []
    for index, street_id in enumerate(sorted(streets)):
        start, end = streets[street_id]
        truth = _sample_path(start, end, spec.keyframe_spacing_m)
        if len(truth) < 2:
            raise ValueError(f"street {street_id!r} too short for spacing {spec.keyframe_spacing_m}")
        for d_index, direction in enumerate(("forward", "backward")):
            rng = np.random.default_rng([spec.seed, index, d_index])
            suffix = "f" if direction == "forward" else "b"
            videos.append(
                _make_video(f"{street_id}_{suffix}", street_id, direction, truth, spec, rng)
            )
    geo = (
        GeoRef(mode=GEO_MODE_LOCAL)
        if spec.geo_mode == GEO_MODE_LOCAL
        else GeoRef(mode=GEO_MODE_LATLNG, origin_lat_deg=35.0, origin_lng_deg=135.0)
    )
    return FixtureWorld(
        spec=spec,
        area_name=f"fixture-{spec.layout}-{spec.seed}",
        geo_ref=geo,
        streets=streets,
        videos=videos,
        landmarks=_landmarks(spec, streets),
        billboards=_billboards(videos),
        ground_truth=_ground_truth(spec, videos),
    )


# ---------------------------------------------------------------------------
# File output in the pipeline's external formats
# ---------------------------------------------------------------------------


def _ref_json(point_xy: np.ndarray, geo: GeoRef) -> dict:
    if geo.mode == GEO_MODE_LATLNG:
        lat, lng = local_to_latlng(MapPoint(float(point_xy[0]), float(point_xy[1])), geo)
        return {"lat_deg": lat, "lng_deg": lng}
    return {"x_m": float(point_xy[0]), "y_m": float(point_xy[1])}


def write_fixture(world: FixtureWorld, out_dir: str | Path, render_frames: bool = True) -> Path:
    """Write area config, trajectory files, ground truth and (optionally) frames."""
    from PIL import Image

    out_dir = Path(out_dir)
    (out_dir / "trajectories").mkdir(parents=True, exist_ok=True)
    videos_json = []
    for v in sorted(world.videos, key=lambda v: v.video_id):
        lines = []
        for i in range(v.n_poses):
            lines.append(
                json.dumps(
                    {
                        "frame": int(v.frame_indices[i]),
                        "t": float(v.timestamps[i]),
                        "pos": [float(v.local_positions[i, 0]), float(v.local_positions[i, 1]), 0.0],
                        "yaw": float(v.local_yaws[i]),
                    }
                )
            )
        (out_dir / "trajectories" / f"{v.video_id}.jsonl").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
        videos_json.append(
            {
                "video_id": v.video_id,
                "street_id": v.street_id,
                "direction": v.direction,
                "trajectory_path": f"trajectories/{v.video_id}.jsonl",
                "frames_dir": f"frames/{v.video_id}",
                "ref_start": _ref_json(v.map_positions[0], world.geo_ref),
                "ref_end": _ref_json(v.map_positions[-1], world.geo_ref),
                "frame_rate_hz": world.spec.frame_rate_hz,
            }
        )
        if render_frames:
            frame_dir = out_dir / "frames" / v.video_id
            frame_dir.mkdir(parents=True, exist_ok=True)
            w, h = world.spec.frame_size
            for i in range(v.n_poses):
                img = render_equirect(
                    float(v.map_positions[i, 0]),
                    float(v.map_positions[i, 1]),
                    float(v.map_yaws[i]),
                    w,
                    h,
                )
                Image.fromarray(img).save(frame_dir / f"{i:06d}.png", compress_level=3)

    geo_json: dict = {"mode": world.geo_ref.mode}
    if world.geo_ref.mode == GEO_MODE_LATLNG:
        geo_json["origin_lat_deg"] = world.geo_ref.origin_lat_deg
        geo_json["origin_lng_deg"] = world.geo_ref.origin_lng_deg
    area = {
        "area_name": world.area_name,
        "geo_ref": geo_json,
        "videos": videos_json,
        "landmarks": [
            {"name": l.name, "map_point": {"x_m": l.point.x_m, "y_m": l.point.y_m}}
            for l in world.landmarks
        ],
        "billboards": [b.to_json() for b in world.billboards],
    }
    (out_dir / "area.json").write_text(json.dumps(area, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / "ground_truth.json").write_text(
        json.dumps(world.ground_truth, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out_dir


def generate(spec: FixtureSpec, out_dir: str | Path, render_frames: bool = True) -> FixtureWorld:
    """Build a fixture and write it out; returns the in-memory world."""
    world = build_fixture(spec)
    write_fixture(world, out_dir, render_frames=render_frames)
    return world
