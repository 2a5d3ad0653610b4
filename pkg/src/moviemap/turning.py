"""Synthesis of the rotating, cross-blended views shown when turning.

Turning between two street videos switches between frames captured at
(nearly) the same spot with different headings. Because the frames are full
equirectangular panoramas, a yaw rotation is an exact horizontal circular
pixel shift, and a turn can be synthesized entirely from the two
intersection frames:

* method A — hard cut, no synthesized frames;
* method B — rotate the before-turn frame through the turn arc, then cut;
* method C — align the after-turn frame to the before-turn heading, then
  rotate a per-pixel blend through the arc while the blend ratio moves
  linearly from 0 to 1.

All pixel math is integer so output is bit-identical across platforms.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .assemble import AssembledMap, exits_toward
from .geometry import equirect_column_shift, wrap_angle
from .intersect import IntersectionRecord
from .scoring import FrameSource, MissingFrameError


class TurnMethod(str, enum.Enum):
    """The three turn-transition styles (CLI letters A/B/C)."""

    CUT = "A"
    ROTATE_ONLY = "B"
    BLEND_ROTATE = "C"


@dataclass(frozen=True)
class EquirectFrame:
    """A full 360x180 panorama as a 2:1 row-major RGB image.

    The image center column is the camera's forward direction; content moves
    toward higher columns as the camera rotates counter-clockwise.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError(f"pixels must be (H, W, 3) uint8, got {px.shape} {px.dtype}")
        h, w = px.shape[:2]
        if w != 2 * h:
            raise ValueError(f"equirectangular frames are 2:1, got {w}x{h}")

    @property
    def width_px(self) -> int:
        return self.pixels.shape[1]

    @property
    def height_px(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "EquirectFrame":
        return cls(pixels=np.ascontiguousarray(arr, dtype=np.uint8))


@dataclass(frozen=True)
class TurnSpec:
    """Inputs of one turn synthesis: the two frames and the relative rotation."""

    frame_i: EquirectFrame
    frame_j: EquirectFrame
    delta_yaw_rad: float
    n_frames: int
    method: TurnMethod

    def __post_init__(self):
        if self.method in (TurnMethod.ROTATE_ONLY, TurnMethod.BLEND_ROTATE) and self.n_frames < 2:
            raise ValueError(f"method {self.method.value} needs n_frames >= 2, got {self.n_frames}")
        if self.n_frames < 0:
            raise ValueError("n_frames must be non-negative")
        if self.frame_i.pixels.shape != self.frame_j.pixels.shape:
            raise ValueError(
                f"frame dimensions differ: {self.frame_i.pixels.shape} vs {self.frame_j.pixels.shape}"
            )


def yaw_rotate(frame: EquirectFrame, yaw_rad: float) -> EquirectFrame:
    """Rotate a panorama by yaw_rad: a pure circular column shift.

    Exact pixel permutation (channel sums are conserved); rotating by a full
    turn is the identity.
    """
    shift = equirect_column_shift(yaw_rad, frame.width_px)
    if shift == 0:
        return frame
    return EquirectFrame(pixels=np.roll(frame.pixels, shift, axis=1))


def _blend_half_up(frame_a: np.ndarray, frame_b: np.ndarray, k: int, steps: int) -> np.ndarray:
    """Integer blend (1 - k/steps)*a + (k/steps)*b, rounded half-up per channel."""
    a = frame_a.astype(np.uint32)
    b = frame_b.astype(np.uint32)
    x = (steps - k) * a + k * b
    return ((2 * x + steps) // (2 * steps)).astype(np.uint8)


def synthesize_turn(spec: TurnSpec) -> list[EquirectFrame]:
    """Generate the turn image sequence for one intersection transition.

    Method C starts bit-exact at frame_i and ends bit-exact at frame_j: the
    blend is exact at its extremes and the alignment and arc column shifts
    cancel by symmetric rounding.
    """
    if spec.method is TurnMethod.CUT:
        return []
    n = spec.n_frames
    steps = n - 1
    if spec.method is TurnMethod.ROTATE_ONLY:
        frames = [yaw_rotate(spec.frame_i, (k / steps) * spec.delta_yaw_rad) for k in range(n - 1)]
        frames.append(spec.frame_j)
        return frames
    aligned_j = yaw_rotate(spec.frame_j, -spec.delta_yaw_rad)
    frames = []
    for k in range(n):
        blended = _blend_half_up(spec.frame_i.pixels, aligned_j.pixels, k, steps)
        frames.append(yaw_rotate(EquirectFrame(pixels=blended), (k / steps) * spec.delta_yaw_rad))
    return frames


# ---------------------------------------------------------------------------
# Per-intersection precomputation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TurnTriple:
    """One permitted (node, arriving section, departing section) transition."""

    node_id: str
    from_section: str
    to_section: str
    video_from: str
    video_to: str
    pose_from: int
    pose_to: int
    delta_yaw_rad: float

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.node_id, self.from_section, self.to_section)


@dataclass
class TurnAsset:
    triple: TurnTriple
    frames: list[EquirectFrame]


@dataclass(frozen=True)
class TurnProblem:
    node_id: str
    from_section: str
    to_section: str
    message: str


def _record_between(node, video_x: str, video_y: str) -> IntersectionRecord | None:
    want = {video_x, video_y}
    for m in node.members:
        if {m.video_a, m.video_b} == want:
            return m
    return None


def turn_triples(
    assembled: AssembledMap,
    *,
    include_uturn: bool = False,
    problems: list[TurnProblem] | None = None,
) -> list[TurnTriple]:
    """Enumerate every transition needing a synthesized turn.

    For each node, each arriving section is paired with each exit offered by
    exits_toward. Transitions that continue within the same video play
    seamlessly and are skipped; with u-turns excluded, a standard 4-way
    crossing of two 2-way streets yields 8 triples. Transitions lacking an
    intersection record (no frame pair to blend) are reported as problems.
    """
    graph = assembled.graph
    triples = []
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        for arriving in sorted(graph.arriving_sections(node_id), key=lambda s: s.section_id):
            for exit_ in exits_toward(graph, node_id, arriving.section_id, include_uturn=include_uturn):
                to_section = graph.sections[exit_.section_id]
                if to_section.video_id == arriving.video_id:
                    continue
                record = _record_between(node, arriving.video_id, to_section.video_id)
                if record is None:
                    if problems is not None:
                        problems.append(
                            TurnProblem(
                                node_id=node_id,
                                from_section=arriving.section_id,
                                to_section=to_section.section_id,
                                message=(
                                    f"no intersection record between {arriving.video_id!r} and "
                                    f"{to_section.video_id!r} at {node_id}"
                                ),
                            )
                        )
                    continue
                if record.video_a == arriving.video_id:
                    pose_from, pose_to = record.pose_a, record.pose_b
                    delta = record.relative_yaw_rad
                else:
                    pose_from, pose_to = record.pose_b, record.pose_a
                    delta = float(wrap_angle(-record.relative_yaw_rad))
                triples.append(
                    TurnTriple(
                        node_id=node_id,
                        from_section=arriving.section_id,
                        to_section=to_section.section_id,
                        video_from=arriving.video_id,
                        video_to=to_section.video_id,
                        pose_from=pose_from,
                        pose_to=pose_to,
                        delta_yaw_rad=delta,
                    )
                )
    return triples


def precompute_turns(
    assembled: AssembledMap,
    frames: Mapping[str, FrameSource],
    n_frames: int = 30,
    method: TurnMethod = TurnMethod.BLEND_ROTATE,
    *,
    include_uturn: bool = False,
    problems: list[TurnProblem] | None = None,
) -> Iterator[TurnAsset]:
    """Synthesize the turn sequence for every permitted transition.

    Yields assets one at a time so callers can stream them to disk. Missing
    frame data is reported per triple (into ``problems``) without aborting
    the remaining transitions.
    """
    for triple in turn_triples(assembled, include_uturn=include_uturn, problems=problems):
        try:
            frame_i = EquirectFrame.from_array(frames[triple.video_from].frame(triple.pose_from))
            frame_j = EquirectFrame.from_array(frames[triple.video_to].frame(triple.pose_to))
        except (KeyError, MissingFrameError) as exc:
            if problems is not None:
                problems.append(
                    TurnProblem(
                        node_id=triple.node_id,
                        from_section=triple.from_section,
                        to_section=triple.to_section,
                        message=f"frame assets unavailable: {exc}",
                    )
                )
            continue
        spec = TurnSpec(
            frame_i=frame_i,
            frame_j=frame_j,
            delta_yaw_rad=triple.delta_yaw_rad,
            n_frames=n_frames if method is not TurnMethod.CUT else 0,
            method=method,
        )
        yield TurnAsset(triple=triple, frames=synthesize_turn(spec))
