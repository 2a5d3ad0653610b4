"""Clustering crossings into physical intersections, splitting videos into
playable sections, and building the navigation graph.

A physical intersection is one real-world crossing; with two-way capture of
two crossing streets it collects four intersection records. Each street
video is cut at its member poses, producing sections (the playback unit),
and every section starting at a node becomes a directed exit with the
absolute bearing of its initial travel direction.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import angular_distance, bearing_of, wrap_angle
from .intersect import IntersectionRecord
from .register import RegisteredTrajectory
from .trajectory import MapPoint

logger = logging.getLogger(__name__)

PATH_END = "PATH_END"

DEFAULT_CLUSTER_RADIUS_M = 8.0
U_TURN_TOLERANCE_RAD = 0.35
BEARING_MIN_DISPLACEMENT_M = 1.0


@dataclass
class PhysicalIntersection:
    """One real-world crossing: the cluster of records that meet there."""

    node_id: str
    center: MapPoint
    members: list[IntersectionRecord]
    incident_streets: frozenset[str] = frozenset()

    def member_poses_of(self, video_id: str) -> list[int]:
        poses = []
        for m in self.members:
            if m.video_a == video_id:
                poses.append(m.pose_a)
            if m.video_b == video_id:
                poses.append(m.pose_b)
        return poses


@dataclass(frozen=True)
class Section:
    """A contiguous pose span of one video between two cut points.

    Endpoints name graph nodes, or PATH_END where the capture simply stops.
    Consecutive sections of one video share their cut pose.
    """

    section_id: str
    video_id: str
    start_pose: int
    end_pose: int
    start_node: str
    end_node: str
    start_timestamp_s: float
    end_timestamp_s: float

    def __post_init__(self):
        if not self.start_pose < self.end_pose:
            raise ValueError(f"{self.section_id}: start_pose must be < end_pose")


@dataclass(frozen=True)
class DirectedExit:
    section_id: str
    bearing_rad: float
    label: str = ""


@dataclass
class NavGraph:
    nodes: dict[str, PhysicalIntersection]
    sections: dict[str, Section]
    outgoing: dict[str, list[DirectedExit]]
    # (start_bearing, end_bearing) per section, map radians in [-pi, pi)
    section_bearings: dict[str, tuple[float, float]]

    def arriving_sections(self, node_id: str) -> list[Section]:
        return [s for s in self.sections.values() if s.end_node == node_id]


def section_id_for(video_id: str, start_pose: int) -> str:
    # Content-derived so ids are stable across rebuilds.
    return f"{video_id}:{start_pose:06d}"


def cluster_intersections(
    records: Sequence[IntersectionRecord],
    cluster_radius_m: float = DEFAULT_CLUSTER_RADIUS_M,
    street_of: Mapping[str, str] | None = None,
) -> list[PhysicalIntersection]:
    """Single-linkage grouping of records into physical intersections.

    Records whose map points are within the radius merge transitively; the
    cluster center is the arithmetic mean of member points. Node ids are
    assigned in order of each cluster's canonically first member, so equal
    inputs always name nodes identically.
    """
    if not records:
        return []
    pts = np.array([r.map_point for r in records], dtype=float)
    parent = list(range(len(records)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(records)):
        for j in range(i + 1, len(records)):
            if math.hypot(pts[i, 0] - pts[j, 0], pts[i, 1] - pts[j, 1]) <= cluster_radius_m:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri

    groups: dict[int, list[IntersectionRecord]] = {}
    for i, rec in enumerate(records):
        groups.setdefault(find(i), []).append(rec)

    def member_key(r: IntersectionRecord):
        return (r.video_a, r.video_b, r.pose_a, r.pose_b)

    clusters = sorted((sorted(g, key=member_key) for g in groups.values()), key=lambda g: member_key(g[0]))
    out = []
    for idx, members in enumerate(clusters):
        center_xy = np.array([m.map_point for m in members], dtype=float).mean(axis=0)
        center = MapPoint(float(center_xy[0]), float(center_xy[1]))
        streets: set[str] = set()
        if street_of is not None:
            for m in members:
                streets.add(street_of[m.video_a])
                streets.add(street_of[m.video_b])
        node = PhysicalIntersection(
            node_id=f"n{idx:03d}",
            center=center,
            members=members,
            incident_streets=frozenset(streets),
        )
        for m in members:
            spread = math.hypot(m.map_point[0] - center.x_m, m.map_point[1] - center.y_m)
            if spread > cluster_radius_m:
                logger.warning(
                    "node %s: member %s/%s lies %.1f m from cluster center (> radius %.1f)",
                    node.node_id, m.video_a, m.video_b, spread, cluster_radius_m,
                )
        out.append(node)
    return out


def split_sections(reg: RegisteredTrajectory, nodes: Sequence[PhysicalIntersection]) -> list[Section]:
    """Cut one video at its intersection poses into covering sections.

    Cut poses are the video's member poses across all nodes, deduplicated
    and sorted; leading/trailing spans get PATH_END endpoints. Every pose of
    the video belongs to some section, adjacent sections sharing exactly the
    cut pose.
    """
    last = reg.n_poses - 1
    cut_nodes: dict[int, str] = {}
    for node in nodes:
        for pose in node.member_poses_of(reg.video_id):
            if not 0 <= pose <= last:
                raise ValueError(
                    f"{reg.video_id}: cut pose {pose} of {node.node_id} outside pose range [0, {last}]"
                )
            existing = cut_nodes.get(pose)
            if existing is not None and existing != node.node_id:
                keep = min(existing, node.node_id)
                logger.warning(
                    "%s: pose %d claimed by nodes %s and %s, keeping %s",
                    reg.video_id, pose, existing, node.node_id, keep,
                )
                cut_nodes[pose] = keep
            else:
                cut_nodes[pose] = node.node_id

    boundaries = sorted(set(cut_nodes) | {0, last})
    ts = reg.timestamps()
    sections = []
    for b0, b1 in zip(boundaries[:-1], boundaries[1:]):
        sections.append(
            Section(
                section_id=section_id_for(reg.video_id, b0),
                video_id=reg.video_id,
                start_pose=b0,
                end_pose=b1,
                start_node=cut_nodes.get(b0, PATH_END),
                end_node=cut_nodes.get(b1, PATH_END),
                start_timestamp_s=float(ts[b0]),
                end_timestamp_s=float(ts[b1]),
            )
        )
    return sections


def _travel_bearing(positions: np.ndarray, yaws: np.ndarray, start: int, end: int, from_start: bool) -> float:
    """Bearing of travel near a section endpoint.

    Measured over the smallest span reaching BEARING_MIN_DISPLACEMENT_M so
    keyframe jitter does not flip arrows; falls back to the total span and
    finally to the registered heading for (near-)stationary spans.
    """
    if from_start:
        anchor = positions[start]
        for k in range(start + 1, end + 1):
            delta = positions[k] - anchor
            if np.hypot(*delta) >= BEARING_MIN_DISPLACEMENT_M:
                return bearing_of(delta)
    else:
        anchor = positions[end]
        for k in range(end - 1, start - 1, -1):
            delta = anchor - positions[k]
            if np.hypot(*delta) >= BEARING_MIN_DISPLACEMENT_M:
                return bearing_of(delta)
    total = positions[end] - positions[start]
    if np.hypot(*total) > 1e-9:
        return bearing_of(total)
    return float(yaws[start if from_start else end])


def build_graph(
    sections: Sequence[Section],
    nodes: Sequence[PhysicalIntersection],
    regs: Sequence[RegisteredTrajectory],
) -> NavGraph:
    """Assemble the navigation graph and per-node directed exits."""
    node_map = {n.node_id: n for n in nodes}
    reg_map = {r.video_id: r for r in regs}
    section_map: dict[str, Section] = {}
    bearings: dict[str, tuple[float, float]] = {}
    for s in sections:
        if s.section_id in section_map:
            raise ValueError(f"duplicate section_id {s.section_id}")
        for endpoint in (s.start_node, s.end_node):
            if endpoint != PATH_END and endpoint not in node_map:
                raise ValueError(f"section {s.section_id} references unknown node {endpoint!r}")
        if s.video_id not in reg_map:
            raise ValueError(f"section {s.section_id} references unknown video {s.video_id!r}")
        reg = reg_map[s.video_id]
        bearings[s.section_id] = (
            _travel_bearing(reg.positions, reg.yaws, s.start_pose, s.end_pose, from_start=True),
            _travel_bearing(reg.positions, reg.yaws, s.start_pose, s.end_pose, from_start=False),
        )
        section_map[s.section_id] = s

    outgoing: dict[str, list[DirectedExit]] = {node_id: [] for node_id in node_map}
    for s in section_map.values():
        if s.start_node == PATH_END:
            continue
        reg = reg_map[s.video_id]
        outgoing[s.start_node].append(
            DirectedExit(
                section_id=s.section_id,
                bearing_rad=bearings[s.section_id][0],
                label=reg.street_id,
            )
        )
    for exits in outgoing.values():
        exits.sort(key=lambda e: (e.bearing_rad, e.section_id))
    return NavGraph(nodes=node_map, sections=section_map, outgoing=outgoing, section_bearings=bearings)


def exits_toward(
    graph: NavGraph,
    node_id: str,
    arriving_section_id: str,
    *,
    include_uturn: bool = False,
    u_turn_tolerance_rad: float = U_TURN_TOLERANCE_RAD,
) -> list[DirectedExit]:
    """Exits offered to a user arriving at a node via a given section.

    The exit pointing back along the arrival direction (within the u-turn
    tolerance) is suppressed unless include_uturn is set. Results are
    ordered by signed bearing difference from straight-ahead, i.e. right
    turns first, then straight, then left.
    """
    if node_id not in graph.nodes:
        raise KeyError(f"unknown node {node_id!r}")
    arriving = graph.sections.get(arriving_section_id)
    if arriving is None:
        raise KeyError(f"unknown section {arriving_section_id!r}")
    if arriving.end_node != node_id:
        raise ValueError(f"section {arriving_section_id!r} does not end at node {node_id!r}")
    arrival_bearing = graph.section_bearings[arriving_section_id][1]
    reverse = wrap_angle(arrival_bearing + math.pi)
    exits = []
    for e in graph.outgoing.get(node_id, []):
        if not include_uturn and angular_distance(e.bearing_rad, reverse) <= u_turn_tolerance_rad:
            continue
        exits.append(e)
    exits.sort(key=lambda e: (wrap_angle(e.bearing_rad - arrival_bearing), e.section_id))
    return exits


# ---------------------------------------------------------------------------
# Assembled map: everything downstream stages need, serializable as one JSON.
# ---------------------------------------------------------------------------


@dataclass
class VideoMeta:
    video_id: str
    street_id: str
    direction: str
    frame_rate_hz: float
    n_poses: int


@dataclass
class AssembledMap:
    nodes: list[PhysicalIntersection]
    sections: list[Section]
    graph: NavGraph
    videos: dict[str, VideoMeta]

    def to_json(self) -> dict:
        return {
            "nodes": [
                {
                    "node_id": n.node_id,
                    "center": [n.center.x_m, n.center.y_m],
                    "incident_streets": sorted(n.incident_streets),
                    "members": [m.to_json() for m in n.members],
                }
                for n in sorted(self.nodes, key=lambda n: n.node_id)
            ],
            "sections": [
                {
                    "section_id": s.section_id,
                    "video_id": s.video_id,
                    "start_pose": s.start_pose,
                    "end_pose": s.end_pose,
                    "start_node": s.start_node,
                    "end_node": s.end_node,
                    "start_timestamp_s": s.start_timestamp_s,
                    "end_timestamp_s": s.end_timestamp_s,
                    "start_bearing_rad": self.graph.section_bearings[s.section_id][0],
                    "end_bearing_rad": self.graph.section_bearings[s.section_id][1],
                }
                for s in sorted(self.sections, key=lambda s: s.section_id)
            ],
            "exits": [
                {
                    "node_id": node_id,
                    "section_id": e.section_id,
                    "bearing_rad": e.bearing_rad,
                    "label": e.label,
                }
                for node_id in sorted(self.graph.outgoing)
                for e in self.graph.outgoing[node_id]
            ],
            "videos": {
                vid: {
                    "street_id": v.street_id,
                    "direction": v.direction,
                    "frame_rate_hz": v.frame_rate_hz,
                    "n_poses": v.n_poses,
                }
                for vid, v in sorted(self.videos.items())
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AssembledMap":
        nodes = [
            PhysicalIntersection(
                node_id=n["node_id"],
                center=MapPoint(n["center"][0], n["center"][1]),
                members=[IntersectionRecord.from_json(m) for m in n["members"]],
                incident_streets=frozenset(n["incident_streets"]),
            )
            for n in obj["nodes"]
        ]
        sections = [
            Section(
                section_id=s["section_id"],
                video_id=s["video_id"],
                start_pose=s["start_pose"],
                end_pose=s["end_pose"],
                start_node=s["start_node"],
                end_node=s["end_node"],
                start_timestamp_s=s["start_timestamp_s"],
                end_timestamp_s=s["end_timestamp_s"],
            )
            for s in obj["sections"]
        ]
        bearings = {
            s["section_id"]: (s["start_bearing_rad"], s["end_bearing_rad"]) for s in obj["sections"]
        }
        outgoing: dict[str, list[DirectedExit]] = {n.node_id: [] for n in nodes}
        for e in obj["exits"]:
            outgoing.setdefault(e["node_id"], []).append(
                DirectedExit(section_id=e["section_id"], bearing_rad=e["bearing_rad"], label=e["label"])
            )
        graph = NavGraph(
            nodes={n.node_id: n for n in nodes},
            sections={s.section_id: s for s in sections},
            outgoing=outgoing,
            section_bearings=bearings,
        )
        videos = {
            vid: VideoMeta(
                video_id=vid,
                street_id=v["street_id"],
                direction=v["direction"],
                frame_rate_hz=v["frame_rate_hz"],
                n_poses=v["n_poses"],
            )
            for vid, v in obj["videos"].items()
        }
        return cls(nodes=nodes, sections=sections, graph=graph, videos=videos)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AssembledMap":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def assemble_area(
    regs: Sequence[RegisteredTrajectory],
    records: Sequence[IntersectionRecord],
    cluster_radius_m: float = DEFAULT_CLUSTER_RADIUS_M,
) -> AssembledMap:
    """Run clustering, splitting and graph construction for a whole area.

    Records between the two directions of one street are dropped first:
    they mark the closest approach of the same physical path, not a
    crossing, and must not spawn graph nodes.
    """
    street_of = {r.video_id: r.street_id for r in regs}
    cross_street = [r for r in records if street_of[r.video_a] != street_of[r.video_b]]
    nodes = cluster_intersections(cross_street, cluster_radius_m, street_of)
    sections: list[Section] = []
    for reg in sorted(regs, key=lambda r: r.video_id):
        sections.extend(split_sections(reg, nodes))
    graph = build_graph(sections, nodes, regs)
    videos = {
        r.video_id: VideoMeta(
            video_id=r.video_id,
            street_id=r.street_id,
            direction=r.direction,
            frame_rate_hz=r.source.frame_rate_hz,
            n_poses=r.n_poses,
        )
        for r in regs
    }
    return AssembledMap(nodes=nodes, sections=sections, graph=graph, videos=videos)
