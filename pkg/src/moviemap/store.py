"""The self-contained movie-map package: manifest plus frame and turn assets.

Package layout on disk::

    manifest.json
    frames/{video_id}/{pose:06d}.png
    turns/{node}/{from}__{to}/{k:04d}.png

The manifest holds all topology and metadata (nodes, sections with per-pose
map samples, exits, landmarks, billboards, turn-asset inventory). It is
written with sorted keys and canonically ordered lists so identical inputs
export byte-identical bytes. Loading validates against a JSON Schema plus
referential-integrity checks that the schema cannot express; failures name
the offending element by JSON pointer.
"""
from __future__ import annotations

import hashlib
import json
import math
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import jsonschema

from .assemble import AssembledMap, NavGraph
from .register import RegisteredTrajectory
from .trajectory import GeoRef, Landmark, MapPoint
from .turning import TurnMethod, turn_triples

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


class PackageValidationError(ValueError):
    """A package violates its schema or referential integrity.

    ``pointer`` is a JSON pointer into manifest.json locating the problem.
    """

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}" if pointer else message)


class ExportError(RuntimeError):
    pass


@dataclass(frozen=True)
class Billboard:
    """An authored overlay anchored to one video timestamp and view direction.

    The anchor is a playback time, not a map position: the billboard pops up
    while playback is near that time. yaw/pitch place it within the panorama.
    """

    billboard_id: str
    video_id: str
    anchor_timestamp_s: float
    yaw_rad: float
    pitch_rad: float
    title: str
    info: str

    def __post_init__(self):
        if not -math.pi <= self.yaw_rad < math.pi:
            raise ValueError(f"billboard {self.billboard_id!r}: yaw_rad must be in [-pi, pi)")
        if not -math.pi / 2 <= self.pitch_rad <= math.pi / 2:
            raise ValueError(f"billboard {self.billboard_id!r}: pitch_rad must be in [-pi/2, pi/2]")
        if self.anchor_timestamp_s < 0:
            raise ValueError(f"billboard {self.billboard_id!r}: anchor_timestamp_s must be >= 0")

    def to_json(self) -> dict:
        return {
            "billboard_id": self.billboard_id,
            "video_id": self.video_id,
            "anchor_timestamp_s": self.anchor_timestamp_s,
            "yaw_rad": self.yaw_rad,
            "pitch_rad": self.pitch_rad,
            "title": self.title,
            "info": self.info,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Billboard":
        return cls(
            billboard_id=obj["billboard_id"],
            video_id=obj["video_id"],
            anchor_timestamp_s=float(obj["anchor_timestamp_s"]),
            yaw_rad=float(obj["yaw_rad"]),
            pitch_rad=float(obj["pitch_rad"]),
            title=obj.get("title", ""),
            info=obj.get("info", ""),
        )


def frame_rel_path(video_id: str, pose: int) -> str:
    return f"frames/{video_id}/{pose:06d}.png"


def turn_rel_path(node_id: str, from_section: str, to_section: str, k: int) -> str:
    return f"turns/{node_id}/{from_section}__{to_section}/{k:04d}.png"


_NUMBER = {"type": "number"}
_POINT2 = {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}
_SAMPLE = {"type": "array", "items": _NUMBER, "minItems": 4, "maxItems": 4}

MANIFEST_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Movie map package manifest",
    "type": "object",
    "required": [
        "manifest_version", "area_name", "asset_kind", "geo_ref", "videos",
        "nodes", "sections", "exits", "landmarks", "billboards", "turns",
    ],
    "properties": {
        "manifest_version": {"const": MANIFEST_VERSION},
        "area_name": {"type": "string"},
        "asset_kind": {"const": "png_sequence"},
        "geo_ref": {
            "type": "object",
            "required": ["mode"],
            "properties": {
                "mode": {"enum": ["latlng_wgs84", "local_xy"]},
                "origin_lat_deg": _NUMBER,
                "origin_lng_deg": _NUMBER,
            },
        },
        "videos": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["street_id", "direction", "frame_rate_hz", "n_poses", "duration_s"],
                "properties": {
                    "street_id": {"type": "string"},
                    "direction": {"enum": ["forward", "backward"]},
                    "frame_rate_hz": {"type": "number", "exclusiveMinimum": 0},
                    "n_poses": {"type": "integer", "minimum": 2},
                    "duration_s": {"type": "number", "minimum": 0},
                },
            },
        },
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["node_id", "center", "incident_streets", "members"],
                "properties": {
                    "node_id": {"type": "string"},
                    "center": _POINT2,
                    "incident_streets": {"type": "array", "items": {"type": "string"}},
                    "members": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": [
                                "video_a", "video_b", "pose_a", "pose_b",
                                "timestamp_a_s", "timestamp_b_s", "map_point",
                                "relative_yaw_rad", "distance_m", "refined",
                            ],
                        },
                    },
                },
            },
        },
        "sections": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "section_id", "video_id", "start_pose", "end_pose", "start_node",
                    "end_node", "start_timestamp_s", "end_timestamp_s",
                    "start_bearing_rad", "end_bearing_rad", "frames", "samples",
                ],
                "properties": {
                    "section_id": {"type": "string"},
                    "video_id": {"type": "string"},
                    "start_pose": {"type": "integer", "minimum": 0},
                    "end_pose": {"type": "integer", "minimum": 1},
                    "frames": {"type": "array", "items": {"type": "string"}, "minItems": 2},
                    "samples": {"type": "array", "items": _SAMPLE, "minItems": 2},
                },
            },
        },
        "exits": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["node_id", "section_id", "bearing_rad", "label"],
            },
        },
        "landmarks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "map_point"],
                "properties": {"name": {"type": "string"}, "map_point": _POINT2},
            },
        },
        "billboards": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "billboard_id", "video_id", "anchor_timestamp_s",
                    "yaw_rad", "pitch_rad", "title", "info",
                ],
            },
        },
        "turns": {
            "type": "object",
            "required": ["method", "n_frames", "assets"],
            "properties": {
                "method": {"enum": ["A", "B", "C"]},
                "n_frames": {"type": "integer", "minimum": 0},
                "assets": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["node_id", "from_section", "to_section", "frames"],
                        "properties": {"frames": {"type": "array", "items": {"type": "string"}}},
                    },
                },
            },
        },
    },
}


@dataclass
class MovieMapPackage:
    """A loaded, validated package rooted at ``root``."""

    root: Path
    manifest: dict
    package_hash: str

    @property
    def area_name(self) -> str:
        return self.manifest["area_name"]

    @property
    def geo_ref(self) -> GeoRef:
        g = self.manifest["geo_ref"]
        return GeoRef(
            mode=g["mode"],
            origin_lat_deg=g.get("origin_lat_deg"),
            origin_lng_deg=g.get("origin_lng_deg"),
        )

    @property
    def videos(self) -> dict:
        return self.manifest["videos"]

    @property
    def sections_by_id(self) -> dict[str, dict]:
        return {s["section_id"]: s for s in self.manifest["sections"]}

    @property
    def landmarks(self) -> list[Landmark]:
        return [
            Landmark(name=l["name"], point=MapPoint(l["map_point"][0], l["map_point"][1]))
            for l in self.manifest["landmarks"]
        ]

    @property
    def billboards(self) -> list[Billboard]:
        return [Billboard.from_json(b) for b in self.manifest["billboards"]]

    @property
    def turn_assets_by_key(self) -> dict[tuple[str, str, str], dict]:
        return {
            (t["node_id"], t["from_section"], t["to_section"]): t
            for t in self.manifest["turns"]["assets"]
        }

    def graph(self) -> NavGraph:
        """Reconstruct the navigation graph from the manifest."""
        assembled = AssembledMap.from_json(
            {
                "nodes": self.manifest["nodes"],
                "sections": self.manifest["sections"],
                "exits": self.manifest["exits"],
                "videos": {
                    vid: {
                        "street_id": v["street_id"],
                        "direction": v["direction"],
                        "frame_rate_hz": v["frame_rate_hz"],
                        "n_poses": v["n_poses"],
                    }
                    for vid, v in self.manifest["videos"].items()
                },
            }
        )
        return assembled.graph

    def asset_path(self, rel: str) -> Path:
        return self.root / rel


def _manifest_bytes(manifest: dict) -> bytes:
    return (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")


def build_manifest(
    *,
    area_name: str,
    geo_ref: GeoRef,
    assembled: AssembledMap,
    registered: Sequence[RegisteredTrajectory],
    landmarks: Sequence[Landmark],
    billboards: Sequence[Billboard],
    turn_method: TurnMethod,
    turn_frames: int,
) -> dict:
    """Assemble the manifest dict (no file I/O, no asset checks)."""
    regs = {r.video_id: r for r in registered}
    base = assembled.to_json()
    geo = {"mode": geo_ref.mode}
    if geo_ref.origin_lat_deg is not None:
        geo["origin_lat_deg"] = geo_ref.origin_lat_deg
        geo["origin_lng_deg"] = geo_ref.origin_lng_deg
    sections = []
    for s in base["sections"]:
        reg = regs[s["video_id"]]
        ts = reg.timestamps()
        entry = dict(s)
        entry["frames"] = [
            frame_rel_path(s["video_id"], pose) for pose in range(s["start_pose"], s["end_pose"] + 1)
        ]
        entry["samples"] = [
            [float(ts[p]), float(reg.positions[p][0]), float(reg.positions[p][1]), float(reg.yaws[p])]
            for p in range(s["start_pose"], s["end_pose"] + 1)
        ]
        sections.append(entry)
    turn_assets = []
    if turn_method is not TurnMethod.CUT:
        for triple in turn_triples(assembled):
            turn_assets.append(
                {
                    "node_id": triple.node_id,
                    "from_section": triple.from_section,
                    "to_section": triple.to_section,
                    "frames": [
                        turn_rel_path(triple.node_id, triple.from_section, triple.to_section, k)
                        for k in range(turn_frames)
                    ],
                }
            )
    return {
        "manifest_version": MANIFEST_VERSION,
        "area_name": area_name,
        "asset_kind": "png_sequence",
        "geo_ref": geo,
        "videos": {
            vid: {
                "street_id": meta.street_id,
                "direction": meta.direction,
                "frame_rate_hz": meta.frame_rate_hz,
                "n_poses": meta.n_poses,
                "duration_s": float(regs[vid].timestamps()[-1]),
            }
            for vid, meta in sorted(assembled.videos.items())
        },
        "nodes": base["nodes"],
        "sections": sections,
        "exits": base["exits"],
        "landmarks": [
            {"name": l.name, "map_point": [l.point.x_m, l.point.y_m]}
            for l in sorted(landmarks, key=lambda l: l.name)
        ],
        "billboards": [
            b.to_json() for b in sorted(billboards, key=lambda b: b.billboard_id)
        ],
        "turns": {
            "method": turn_method.value,
            "n_frames": turn_frames if turn_method is not TurnMethod.CUT else 0,
            "assets": turn_assets,
        },
    }


def export_package(
    out_dir: str | Path,
    *,
    area_name: str,
    geo_ref: GeoRef,
    assembled: AssembledMap,
    registered: Sequence[RegisteredTrajectory],
    frame_dirs: Mapping[str, Path],
    turns_dir: Path | None,
    landmarks: Sequence[Landmark] = (),
    billboards: Sequence[Billboard] = (),
    turn_method: TurnMethod = TurnMethod.BLEND_ROTATE,
    turn_frames: int = 30,
) -> MovieMapPackage:
    """Write a complete package directory and return it loaded.

    Frame PNGs are copied from ``frame_dirs`` (one source directory per
    video) and turn sequences from the ``mm turns`` output tree. Exporting
    is deterministic: the same inputs produce a byte-identical manifest.
    Missing source assets abort with an error naming the missing piece.
    """
    out_dir = Path(out_dir)
    manifest = build_manifest(
        area_name=area_name,
        geo_ref=geo_ref,
        assembled=assembled,
        registered=registered,
        landmarks=landmarks,
        billboards=billboards,
        turn_method=turn_method,
        turn_frames=turn_frames,
    )

    copies: list[tuple[Path, str]] = []
    for vid, meta in sorted(assembled.videos.items()):
        src_dir = frame_dirs.get(vid)
        if src_dir is None:
            raise ExportError(f"no frame directory for video {vid!r}")
        for pose in range(meta.n_poses):
            src = Path(src_dir) / f"{pose:06d}.png"
            if not src.exists():
                raise ExportError(f"missing frame {src} for video {vid!r}")
            copies.append((src, frame_rel_path(vid, pose)))
    for asset in manifest["turns"]["assets"]:
        key = (asset["node_id"], asset["from_section"], asset["to_section"])
        if turns_dir is None:
            raise ExportError(f"missing turn asset {key}: no turns directory given")
        src_base = Path(turns_dir) / asset["node_id"] / f"{asset['from_section']}__{asset['to_section']}"
        for k, rel in enumerate(asset["frames"]):
            src = src_base / f"{k:04d}.png"
            if not src.exists():
                raise ExportError(f"missing turn asset {key} frame {k} ({src})")
            copies.append((src, rel))

    out_dir.mkdir(parents=True, exist_ok=True)
    for src, rel in copies:
        dst = out_dir / rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(src, dst)
    (out_dir / MANIFEST_NAME).write_bytes(_manifest_bytes(manifest))
    return load_package(out_dir)


def _check_integrity(manifest: dict, root: Path) -> None:
    """Referential checks beyond the schema; raises with a JSON pointer."""
    videos = manifest["videos"]
    node_ids = set()
    for i, node in enumerate(manifest["nodes"]):
        if node["node_id"] in node_ids:
            raise PackageValidationError("duplicate node_id", f"/nodes/{i}/node_id")
        node_ids.add(node["node_id"])
        for j, m in enumerate(node["members"]):
            for side in ("video_a", "video_b"):
                if m[side] not in videos:
                    raise PackageValidationError(
                        f"unknown video {m[side]!r}", f"/nodes/{i}/members/{j}/{side}"
                    )
    section_ids = {}
    for i, s in enumerate(manifest["sections"]):
        if s["section_id"] in section_ids:
            raise PackageValidationError("duplicate section_id", f"/sections/{i}/section_id")
        section_ids[s["section_id"]] = s
        if s["video_id"] not in videos:
            raise PackageValidationError(f"unknown video {s['video_id']!r}", f"/sections/{i}/video_id")
        for side in ("start_node", "end_node"):
            if s[side] != "PATH_END" and s[side] not in node_ids:
                raise PackageValidationError(f"unknown node {s[side]!r}", f"/sections/{i}/{side}")
        if not s["start_pose"] < s["end_pose"]:
            raise PackageValidationError("start_pose must be < end_pose", f"/sections/{i}/start_pose")
        want = s["end_pose"] - s["start_pose"] + 1
        if len(s["frames"]) != want or len(s["samples"]) != want:
            raise PackageValidationError(
                f"expected {want} frames and samples", f"/sections/{i}/frames"
            )
        for j, rel in enumerate(s["frames"]):
            if not (root / rel).exists():
                raise PackageValidationError(f"missing asset {rel}", f"/sections/{i}/frames/{j}")
    for i, e in enumerate(manifest["exits"]):
        if e["node_id"] not in node_ids:
            raise PackageValidationError(f"unknown node {e['node_id']!r}", f"/exits/{i}/node_id")
        if e["section_id"] not in section_ids:
            raise PackageValidationError(f"unknown section {e['section_id']!r}", f"/exits/{i}/section_id")
    for i, t in enumerate(manifest["turns"]["assets"]):
        if t["node_id"] not in node_ids:
            raise PackageValidationError(f"unknown node {t['node_id']!r}", f"/turns/assets/{i}/node_id")
        for side in ("from_section", "to_section"):
            if t[side] not in section_ids:
                raise PackageValidationError(
                    f"unknown section {t[side]!r}", f"/turns/assets/{i}/{side}"
                )
        for j, rel in enumerate(t["frames"]):
            if not (root / rel).exists():
                raise PackageValidationError(f"missing asset {rel}", f"/turns/assets/{i}/frames/{j}")
    for i, b in enumerate(manifest["billboards"]):
        bb = Billboard.from_json(b)  # re-runs range validation
        if bb.video_id not in videos:
            raise PackageValidationError(f"unknown video {bb.video_id!r}", f"/billboards/{i}/video_id")
        duration = videos[bb.video_id]["duration_s"]
        if bb.anchor_timestamp_s > duration:
            raise PackageValidationError(
                f"anchor {bb.anchor_timestamp_s} s beyond video duration {duration} s",
                f"/billboards/{i}/anchor_timestamp_s",
            )


def load_package(pkg_dir: str | Path) -> MovieMapPackage:
    """Load and fully validate a package directory."""
    root = Path(pkg_dir)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise PackageValidationError(f"no {MANIFEST_NAME} in {root}")
    raw = manifest_path.read_bytes()
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise PackageValidationError(f"manifest is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(manifest, MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        pointer = "/" + "/".join(str(p) for p in exc.absolute_path)
        raise PackageValidationError(exc.message, pointer) from None
    _check_integrity(manifest, root)
    return MovieMapPackage(
        root=root,
        manifest=manifest,
        package_hash=hashlib.sha256(raw).hexdigest(),
    )


def billboards_near(pkg: MovieMapPackage, video_id: str, t_s: float, window_s: float = 5.0) -> list[Billboard]:
    """Billboards of one video whose anchor is within the time window of t_s.

    Sorted nearest-first; ties break on billboard_id.
    """
    if video_id not in pkg.videos:
        raise KeyError(f"unknown video {video_id!r}")
    hits = [
        b
        for b in pkg.billboards
        if b.video_id == video_id and abs(b.anchor_timestamp_s - t_s) <= window_s
    ]
    hits.sort(key=lambda b: (abs(b.anchor_timestamp_s - t_s), b.billboard_id))
    return hits
