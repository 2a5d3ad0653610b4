"""Mapping per-video relative trajectories onto the shared map.

Each video is anchored by exactly two reference map coordinates, matching
its first and last keyframe. A single 2-D similarity transform (rotation +
uniform scale + translation) is solved so the local start-to-end vector maps
onto the reference vector, then applied to every pose. No least-squares over
interior poses and no drift correction: residual vSLAM error is accepted and
compensated visually at intersections downstream.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import wrap_angle
from .trajectory import MapPoint, VideoTrajectory

ENDPOINT_TOL_M = 1e-6


class DegenerateTrajectoryError(ValueError):
    """First and last pose coincide in the xy-plane: no transform exists."""


class RegistrationError(ValueError):
    """One or more trajectories failed to register. Carries (video_id, reason) pairs."""

    def __init__(self, failures: list[tuple[str, str]]):
        self.failures = failures
        detail = "; ".join(f"{vid}: {msg}" for vid, msg in failures)
        super().__init__(f"registration failed for {len(failures)} trajectory(ies): {detail}")


@dataclass(frozen=True)
class SimilarityTransform2D:
    """p_map = scale * R(rotation) * p_local + translation."""

    rotation_rad: float
    scale: float
    translation: tuple[float, float]

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def apply_xy(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 2) array of local xy points to map meters."""
        c = math.cos(self.rotation_rad)
        s = math.sin(self.rotation_rad)
        rot = np.array([[c, -s], [s, c]])
        return self.scale * points @ rot.T + np.asarray(self.translation)


@dataclass
class RegisteredTrajectory:
    """A trajectory expressed in shared map coordinates.

    ``positions`` is (N, 2) map meters, ``yaws`` (N,) radians in [-pi, pi),
    index-aligned with ``source.poses``.
    """

    video_id: str
    positions: np.ndarray
    yaws: np.ndarray
    source: VideoTrajectory

    def __post_init__(self):
        n = len(self.source.poses)
        if self.positions.shape != (n, 2) or self.yaws.shape != (n,):
            raise ValueError(f"{self.video_id}: registered arrays must match source pose count {n}")
        for label, got, want in (
            ("first", self.positions[0], self.source.ref_start),
            ("last", self.positions[-1], self.source.ref_end),
        ):
            err = math.hypot(got[0] - want.x_m, got[1] - want.y_m)
            if err > ENDPOINT_TOL_M:
                raise ValueError(
                    f"{self.video_id}: {label} registered point off its reference by {err:.3e} m"
                )

    @property
    def street_id(self) -> str:
        return self.source.street_id

    @property
    def direction(self) -> str:
        return self.source.direction

    @property
    def n_poses(self) -> int:
        return len(self.yaws)

    def timestamps(self) -> np.ndarray:
        return self.source.timestamps()

    def map_points(self) -> list[MapPoint]:
        return [MapPoint(float(x), float(y)) for x, y in self.positions]


def compute_similarity(traj: VideoTrajectory) -> SimilarityTransform2D:
    """Solve the two-point alignment for one trajectory.

    Rotation and scale map the local start-to-end vector onto the
    ref_start-to-ref_end vector; the translation then pins the transformed
    start onto ref_start exactly.
    """
    local = traj.positions_xy()
    v_local = local[-1] - local[0]
    norm_local = float(np.hypot(*v_local))
    if norm_local == 0.0:
        raise DegenerateTrajectoryError(
            f"{traj.video_id}: first and last pose coincide in xy, cannot orient"
        )
    v_ref = traj.ref_end.as_array() - traj.ref_start.as_array()
    norm_ref = float(np.hypot(*v_ref))
    rotation = wrap_angle(math.atan2(v_ref[1], v_ref[0]) - math.atan2(v_local[1], v_local[0]))
    scale = norm_ref / norm_local
    c = math.cos(rotation)
    s = math.sin(rotation)
    start = local[0]
    tx = traj.ref_start.x_m - scale * (c * start[0] - s * start[1])
    ty = traj.ref_start.y_m - scale * (s * start[0] + c * start[1])
    return SimilarityTransform2D(rotation_rad=float(rotation), scale=scale, translation=(tx, ty))


def apply_transform(traj: VideoTrajectory, transform: SimilarityTransform2D) -> RegisteredTrajectory:
    """Apply one similarity transform to every pose position and heading."""
    positions = transform.apply_xy(traj.positions_xy())
    # Force the endpoints onto their references: the construction maps them
    # there exactly, this removes the last-ulp float noise.
    positions[0] = traj.ref_start.as_array()
    yaws = wrap_angle(traj.yaws() + transform.rotation_rad)
    return RegisteredTrajectory(video_id=traj.video_id, positions=positions, yaws=yaws, source=traj)


def register_trajectory(traj: VideoTrajectory) -> RegisteredTrajectory:
    return apply_transform(traj, compute_similarity(traj))


def register_area(trajectories: list[VideoTrajectory]) -> list[RegisteredTrajectory]:
    """Register every trajectory, preserving input order.

    Per-trajectory failures are aggregated into one RegistrationError naming
    each failing video_id.
    """
    registered: list[RegisteredTrajectory] = []
    failures: list[tuple[str, str]] = []
    for traj in trajectories:
        try:
            registered.append(register_trajectory(traj))
        except (DegenerateTrajectoryError, ValueError) as exc:
            failures.append((traj.video_id, str(exc)))
    if failures:
        raise RegistrationError(failures)
    return registered


# ---------------------------------------------------------------------------
# On-disk format: one JSON-Lines file per video (source keyframe fields plus
# map_x/map_y/map_yaw) and an index.json with per-video capture metadata.
# ---------------------------------------------------------------------------

INDEX_NAME = "index.json"


def write_registered(registered: list[RegisteredTrajectory], out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {}
    for reg in sorted(registered, key=lambda r: r.video_id):
        src = reg.source
        lines = []
        for pose, xy, yaw in zip(src.poses, reg.positions, reg.yaws):
            lines.append(
                json.dumps(
                    {
                        "frame": pose.frame_index,
                        "t": pose.timestamp_s,
                        "pos": list(pose.position),
                        "yaw": pose.yaw_rad,
                        "map_x": float(xy[0]),
                        "map_y": float(xy[1]),
                        "map_yaw": float(yaw),
                    }
                )
            )
        (out_dir / f"{reg.video_id}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
        index[reg.video_id] = {
            "street_id": src.street_id,
            "direction": src.direction,
            "frame_rate_hz": src.frame_rate_hz,
            "ref_start": [src.ref_start.x_m, src.ref_start.y_m],
            "ref_end": [src.ref_end.x_m, src.ref_end.y_m],
            "n_poses": reg.n_poses,
        }
    (out_dir / INDEX_NAME).write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_registered(reg_dir: Path) -> list[RegisteredTrajectory]:
    """Load a directory written by write_registered, sorted by video_id."""
    reg_dir = Path(reg_dir)
    index_path = reg_dir / INDEX_NAME
    if not index_path.exists():
        raise FileNotFoundError(f"no {INDEX_NAME} in {reg_dir}")
    index = json.loads(index_path.read_text(encoding="utf-8"))
    out: list[RegisteredTrajectory] = []
    from .trajectory import KeyframePose  # local import to keep module load light

    for video_id in sorted(index):
        meta = index[video_id]
        poses: list[KeyframePose] = []
        map_xy: list[tuple[float, float]] = []
        map_yaws: list[float] = []
        path = reg_dir / f"{video_id}.jsonl"
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            poses.append(
                KeyframePose(
                    frame_index=obj["frame"],
                    timestamp_s=obj["t"],
                    position=tuple(obj["pos"]),
                    yaw_rad=obj["yaw"],
                )
            )
            map_xy.append((obj["map_x"], obj["map_y"]))
            map_yaws.append(obj["map_yaw"])
        src = VideoTrajectory(
            video_id=video_id,
            street_id=meta["street_id"],
            direction=meta["direction"],
            poses=poses,
            ref_start=MapPoint(*meta["ref_start"]),
            ref_end=MapPoint(*meta["ref_end"]),
            frame_rate_hz=meta["frame_rate_hz"],
        )
        out.append(
            RegisteredTrajectory(
                video_id=video_id,
                positions=np.array(map_xy, dtype=float),
                yaws=np.array(map_yaws, dtype=float),
                source=src,
            )
        )
    return out
