"""Core pose/trajectory types and the JSON-Lines trajectory interchange format.

A trajectory file is UTF-8 JSON-Lines, one object per keyframe:

    {"frame": 0, "t": 0.0, "pos": [0.0, 0.0, 0.0], "yaw": 0.0}

``frame`` is the video frame index, ``t`` seconds from video start, ``pos``
the camera position in the trajectory's local frame (arbitrary scale, z is
carried but ignored by all map geometry), ``yaw`` the local heading in
radians. Poses are relative; two reference map coordinates anchor each video
onto the shared map (see :mod:`moviemap.register`).
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Literal

import numpy as np

from .geometry import wrap_angle

EARTH_RADIUS_M = 6_378_137.0

Direction = Literal["forward", "backward"]
DIRECTIONS = ("forward", "backward")

GEO_MODE_LATLNG = "latlng_wgs84"
GEO_MODE_LOCAL = "local_xy"


class TrajectoryParseError(ValueError):
    """Raised for malformed or invariant-violating trajectory input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class MapPoint:
    """A point on the shared map, meters east/north of the area origin."""

    x_m: float
    y_m: float

    def __post_init__(self):
        if not (math.isfinite(self.x_m) and math.isfinite(self.y_m)):
            raise ValueError(f"map point must be finite, got ({self.x_m}, {self.y_m})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m], dtype=float)

    def distance_to(self, other: "MapPoint") -> float:
        return math.hypot(self.x_m - other.x_m, self.y_m - other.y_m)


@dataclass(frozen=True)
class Landmark:
    """A named point of interest shown on the start-selection map."""

    name: str
    point: "MapPoint"


@dataclass(frozen=True)
class GeoRef:
    """How reference coordinates in the area config are expressed.

    ``latlng_wgs84`` references are projected into local meters around the
    stated origin; ``local_xy`` references are already map meters.
    """

    mode: str
    origin_lat_deg: float | None = None
    origin_lng_deg: float | None = None

    def __post_init__(self):
        if self.mode not in (GEO_MODE_LATLNG, GEO_MODE_LOCAL):
            raise ValueError(f"unknown geo_ref mode {self.mode!r}")
        has_origin = self.origin_lat_deg is not None and self.origin_lng_deg is not None
        if self.mode == GEO_MODE_LATLNG and not has_origin:
            raise ValueError("latlng_wgs84 geo_ref requires origin_lat_deg and origin_lng_deg")
        if self.mode == GEO_MODE_LOCAL and (self.origin_lat_deg is not None or self.origin_lng_deg is not None):
            raise ValueError("local_xy geo_ref must not carry a lat/lng origin")


@dataclass(frozen=True)
class KeyframePose:
    """One keyframe: video frame index, timestamp, local position and heading."""

    frame_index: int
    timestamp_s: float
    position: tuple[float, float, float]
    yaw_rad: float

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be non-negative, got {self.frame_index}")
        if not self.timestamp_s >= 0.0:
            raise ValueError(f"timestamp_s must be non-negative, got {self.timestamp_s}")


@dataclass
class VideoTrajectory:
    """All keyframe poses of one street video plus its two map references.

    The two reference coordinates correspond to the first and last keyframe;
    interior reference points are not supported.
    """

    video_id: str
    street_id: str
    direction: Direction
    poses: list[KeyframePose]
    ref_start: MapPoint
    ref_end: MapPoint
    frame_rate_hz: float

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if len(self.poses) < 2:
            raise ValueError(f"{self.video_id}: trajectory needs at least 2 poses, got {len(self.poses)}")
        if self.ref_start == self.ref_end:
            raise ValueError(f"{self.video_id}: ref_start and ref_end must differ")
        if not self.frame_rate_hz > 0:
            raise ValueError(f"{self.video_id}: frame_rate_hz must be positive")
        _check_pose_order(self.poses)

    @property
    def n_poses(self) -> int:
        return len(self.poses)

    def positions_xy(self) -> np.ndarray:
        """Local xy positions, shape (N, 2). z is dropped: the map is planar."""
        return np.array([p.position[:2] for p in self.poses], dtype=float)

    def yaws(self) -> np.ndarray:
        return np.array([p.yaw_rad for p in self.poses], dtype=float)

    def timestamps(self) -> np.ndarray:
        return np.array([p.timestamp_s for p in self.poses], dtype=float)


def _check_pose_order(poses: Iterable[KeyframePose]) -> None:
    prev: KeyframePose | None = None
    for pose in poses:
        if prev is not None:
            if pose.frame_index <= prev.frame_index:
                raise TrajectoryParseError(
                    f"frame_index not strictly increasing: {prev.frame_index} then {pose.frame_index}"
                )
            if pose.timestamp_s < prev.timestamp_s:
                raise TrajectoryParseError(
                    f"timestamp_s decreasing: {prev.timestamp_s} then {pose.timestamp_s}"
                )
        prev = pose


def _parse_pose_line(obj: dict, line_no: int) -> KeyframePose:
    try:
        frame = obj["frame"]
        t = obj["t"]
        pos = obj["pos"]
        yaw = obj["yaw"]
    except (KeyError, TypeError) as exc:
        raise TrajectoryParseError(f"missing key {exc}", line=line_no) from None
    if not isinstance(frame, int) or isinstance(frame, bool):
        raise TrajectoryParseError(f"frame must be an integer, got {frame!r}", line=line_no)
    if not isinstance(pos, (list, tuple)) or len(pos) != 3:
        raise TrajectoryParseError(f"pos must be an array of 3 numbers, got {pos!r}", line=line_no)
    try:
        position = (float(pos[0]), float(pos[1]), float(pos[2]))
        t = float(t)
        yaw = float(yaw)
    except (TypeError, ValueError):
        raise TrajectoryParseError("non-numeric field", line=line_no) from None
    # Yaw is normalized to [-pi, pi); inputs already in range pass through
    # untouched so round-trips stay bit-exact.
    if not (-math.pi <= yaw < math.pi):
        yaw = float(wrap_angle(yaw))
    return KeyframePose(frame_index=frame, timestamp_s=t, position=position, yaw_rad=yaw)


def parse_trajectory(
    stream: IO[bytes] | bytes,
    video_id: str,
    *,
    street_id: str,
    direction: Direction,
    ref_start: MapPoint,
    ref_end: MapPoint,
    frame_rate_hz: float,
) -> VideoTrajectory:
    """Parse a JSON-Lines trajectory stream into a validated VideoTrajectory.

    The stream carries only the keyframes; capture metadata (street,
    direction, the two reference coordinates, frame rate) comes from the
    area config and is supplied by the caller.

    Raises TrajectoryParseError with the 1-based line number for malformed
    lines, non-monotonic frame indices or decreasing timestamps, and for
    fewer than 2 poses.
    """
    if isinstance(stream, bytes):
        stream = io.BytesIO(stream)
    poses: list[KeyframePose] = []
    prev: KeyframePose | None = None
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TrajectoryParseError(f"invalid JSON: {exc.msg}", line=line_no) from None
        pose = _parse_pose_line(obj, line_no)
        if prev is not None:
            if pose.frame_index <= prev.frame_index:
                raise TrajectoryParseError(
                    f"frame_index not strictly increasing: {prev.frame_index} then {pose.frame_index}",
                    line=line_no,
                )
            if pose.timestamp_s < prev.timestamp_s:
                raise TrajectoryParseError(
                    f"timestamp_s decreasing: {prev.timestamp_s} then {pose.timestamp_s}",
                    line=line_no,
                )
        poses.append(pose)
        prev = pose
    if len(poses) < 2:
        raise TrajectoryParseError(f"trajectory {video_id!r} has {len(poses)} poses, need at least 2")
    return VideoTrajectory(
        video_id=video_id,
        street_id=street_id,
        direction=direction,
        poses=poses,
        ref_start=ref_start,
        ref_end=ref_end,
        frame_rate_hz=frame_rate_hz,
    )


def serialize_trajectory(traj: VideoTrajectory) -> bytes:
    """Write a trajectory back to JSON-Lines bytes, inverse of parse_trajectory."""
    lines = []
    for p in traj.poses:
        lines.append(
            json.dumps(
                {"frame": p.frame_index, "t": p.timestamp_s, "pos": list(p.position), "yaw": p.yaw_rad}
            )
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def latlng_to_local(lat_deg: float, lng_deg: float, geo: GeoRef) -> MapPoint:
    """Project WGS-84 lat/lng to local map meters around the geo_ref origin.

    Equirectangular local projection: east offset is scaled by the cosine of
    the origin latitude, north offset is latitude degrees times meridian arc.
    Adequate for city-scale areas; not a general map projection.
    """
    if geo.mode != GEO_MODE_LATLNG:
        raise ValueError(f"latlng_to_local requires mode {GEO_MODE_LATLNG!r}, got {geo.mode!r}")
    rad = math.pi / 180.0
    x = (lng_deg - geo.origin_lng_deg) * rad * EARTH_RADIUS_M * math.cos(geo.origin_lat_deg * rad)
    y = (lat_deg - geo.origin_lat_deg) * rad * EARTH_RADIUS_M
    return MapPoint(x_m=x, y_m=y)


def local_to_latlng(point: MapPoint, geo: GeoRef) -> tuple[float, float]:
    """Inverse of latlng_to_local (used by the fixture generator)."""
    if geo.mode != GEO_MODE_LATLNG:
        raise ValueError(f"local_to_latlng requires mode {GEO_MODE_LATLNG!r}, got {geo.mode!r}")
    rad = math.pi / 180.0
    lat = geo.origin_lat_deg + point.y_m / (rad * EARTH_RADIUS_M)
    lng = geo.origin_lng_deg + point.x_m / (rad * EARTH_RADIUS_M * math.cos(geo.origin_lat_deg * rad))
    return (lat, lng)
