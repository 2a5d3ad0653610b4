"""Area config loading and capture-convention validation.

The area config is one JSON file describing everything the pipeline needs
about a captured area: how reference coordinates are expressed (``geo_ref``),
the list of videos with their trajectory files and reference points, named
landmarks for the exploration start screen, and authored billboards.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import polyline_crossing_points
from .register import register_trajectory
from .store import Billboard
from .trajectory import (
    GEO_MODE_LATLNG,
    GEO_MODE_LOCAL,
    DIRECTIONS,
    GeoRef,
    Landmark,
    MapPoint,
    VideoTrajectory,
    latlng_to_local,
    parse_trajectory,
)


@dataclass(frozen=True)
class AreaVideo:
    """One video entry of the area config (paths relative to the config file)."""

    video_id: str
    street_id: str
    direction: str
    trajectory_path: str
    frames_dir: str
    ref_start: MapPoint
    ref_end: MapPoint
    frame_rate_hz: float


@dataclass
class AreaConfig:
    area_name: str
    geo_ref: GeoRef
    videos: list[AreaVideo]
    landmarks: list[Landmark]
    billboards: list[Billboard]
    base_dir: Path

    def video(self, video_id: str) -> AreaVideo:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)


@dataclass(frozen=True)
class PipelineWarning:
    """A non-fatal finding about the captured data, for the operator."""

    code: str
    message: str
    video_ids: tuple[str, ...] = ()


def _parse_ref(obj: dict, geo: GeoRef) -> MapPoint:
    if geo.mode == GEO_MODE_LATLNG:
        return latlng_to_local(float(obj["lat_deg"]), float(obj["lng_deg"]), geo)
    return MapPoint(x_m=float(obj["x_m"]), y_m=float(obj["y_m"]))


def load_area_config(path: str | Path) -> AreaConfig:
    """Read and validate an area config file.

    Reference coordinates are converted to local map meters here, so the
    rest of the pipeline never sees latitudes or longitudes.
    """
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    geo_raw = raw.get("geo_ref", {"mode": GEO_MODE_LOCAL})
    geo = GeoRef(
        mode=geo_raw.get("mode", GEO_MODE_LOCAL),
        origin_lat_deg=geo_raw.get("origin_lat_deg"),
        origin_lng_deg=geo_raw.get("origin_lng_deg"),
    )
    videos = []
    for v in raw.get("videos", []):
        if v["direction"] not in DIRECTIONS:
            raise ValueError(f"video {v['video_id']!r}: bad direction {v['direction']!r}")
        videos.append(
            AreaVideo(
                video_id=v["video_id"],
                street_id=v["street_id"],
                direction=v["direction"],
                trajectory_path=v["trajectory_path"],
                frames_dir=v.get("frames_dir", f"frames/{v['video_id']}"),
                ref_start=_parse_ref(v["ref_start"], geo),
                ref_end=_parse_ref(v["ref_end"], geo),
                frame_rate_hz=float(v["frame_rate_hz"]),
            )
        )
    seen: set[tuple[str, str]] = set()
    for v in videos:
        key = (v.street_id, v.direction)
        if key in seen:
            raise ValueError(f"duplicate capture for street {v.street_id!r} direction {v.direction!r}")
        seen.add(key)
    landmarks = [
        Landmark(name=l["name"], point=MapPoint(x_m=float(l["map_point"]["x_m"]), y_m=float(l["map_point"]["y_m"])))
        for l in raw.get("landmarks", [])
    ]
    billboards = [Billboard.from_json(b) for b in raw.get("billboards", [])]
    return AreaConfig(
        area_name=raw.get("area_name", path.stem),
        geo_ref=geo,
        videos=videos,
        landmarks=landmarks,
        billboards=billboards,
        base_dir=path.parent,
    )


def load_trajectories(cfg: AreaConfig) -> list[VideoTrajectory]:
    """Parse every trajectory file referenced by the config, in config order."""
    out = []
    for v in cfg.videos:
        traj_path = cfg.base_dir / v.trajectory_path
        with open(traj_path, "rb") as fh:
            out.append(
                parse_trajectory(
                    fh,
                    v.video_id,
                    street_id=v.street_id,
                    direction=v.direction,
                    ref_start=v.ref_start,
                    ref_end=v.ref_end,
                    frame_rate_hz=v.frame_rate_hz,
                )
            )
    return out


def validate_area(trajectories: list[VideoTrajectory]) -> list[PipelineWarning]:
    """Check capture conventions, reporting problems without failing.

    Two findings are reported: a street captured in only one direction, and
    a pair of registered paths from *different* streets that cross more than
    once (the downstream single-crossing assumption; the remedy, splitting
    one path in two, is the operator's). The two directions of one street
    overlap along their whole length by construction and are exempt from the
    crossing check.
    """
    warnings: list[PipelineWarning] = []
    by_street: dict[str, set[str]] = {}
    for t in trajectories:
        by_street.setdefault(t.street_id, set()).add(t.direction)
    for street_id in sorted(by_street):
        missing = set(DIRECTIONS) - by_street[street_id]
        for direction in sorted(missing):
            vids = tuple(t.video_id for t in trajectories if t.street_id == street_id)
            warnings.append(
                PipelineWarning(
                    code="missing-direction",
                    message=f"street {street_id!r} has no {direction} capture",
                    video_ids=vids,
                )
            )

    previews = {}
    for t in trajectories:
        try:
            previews[t.video_id] = register_trajectory(t)
        except ValueError as exc:
            warnings.append(
                PipelineWarning(
                    code="unregistrable",
                    message=f"cannot preview-register {t.video_id!r}: {exc}",
                    video_ids=(t.video_id,),
                )
            )
    for a, b in itertools.combinations(sorted(previews), 2):
        reg_a, reg_b = previews[a], previews[b]
        if reg_a.street_id == reg_b.street_id:
            continue
        crossings = polyline_crossing_points(reg_a.positions, reg_b.positions)
        if len(crossings) > 1:
            warnings.append(
                PipelineWarning(
                    code="multi-crossing",
                    message=(
                        f"paths of {a!r} and {b!r} cross {len(crossings)} times; "
                        "split one of them into two paths"
                    ),
                    video_ids=(a, b),
                )
            )
    return warnings
