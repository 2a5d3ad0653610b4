"""Intersection detection between registered street trajectories.

For each pair of videos the search runs in three stages:

1. Rectangle pruning — each trajectory is divided into fixed-length chunks
   of poses, each chunk covered by a padded axis-aligned rectangle, and two
   extra rectangles extend past the endpoints so crossings at a path's very
   end (T-junctions) are not missed. Only chunk pairs whose rectangles
   overlap are searched.
2. Full nearest-pair search inside the surviving chunk pairs, tie-broken by
   smallest (pose_a, pose_b).
3. Optional visual refinement: within a pose window around the positional
   seed, the pair whose frames are most similar (after derotating one frame
   by the registered yaw difference) wins.

If padding is at least the keyframe spacing, the pruning is lossless: the
globally nearest pose pair always lies inside some overlapping chunk pair
because two inflated rectangles that fail to overlap are more than twice
the padding apart on some axis.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .geometry import Rect, bounds_of, equirect_column_shift, rects_overlap, wrap_angle
from .register import RegisteredTrajectory
from .scoring import FrameSource, MissingFrameError, OrbScorer, VisualScorer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChunkRect:
    """A padded bounding rectangle over a contiguous pose range of one video."""

    video_id: str
    chunk_index: int
    pose_range: tuple[int, int]  # inclusive ordinals
    bounds: Rect
    extended: bool = False

    def __post_init__(self):
        first, last = self.pose_range
        if last < first:
            raise ValueError(f"empty pose_range {self.pose_range}")


@dataclass(frozen=True)
class IntersectionRecord:
    """The best frame pair where two street videos cross.

    Videos are kept in lexicographic order (video_a < video_b) so a pair has
    one canonical record; relative_yaw_rad is map_yaw_b - map_yaw_a wrapped
    to [-pi, pi).
    """

    video_a: str
    video_b: str
    pose_a: int
    pose_b: int
    timestamp_a_s: float
    timestamp_b_s: float
    map_point: tuple[float, float]
    relative_yaw_rad: float
    distance_m: float
    refined: bool

    def __post_init__(self):
        if not self.video_a < self.video_b:
            raise ValueError(f"records are canonical: need video_a < video_b, got {self.video_a!r}, {self.video_b!r}")
        if self.distance_m < 0:
            raise ValueError("distance_m must be non-negative")

    def to_json(self) -> dict:
        return {
            "video_a": self.video_a,
            "video_b": self.video_b,
            "pose_a": self.pose_a,
            "pose_b": self.pose_b,
            "timestamp_a_s": self.timestamp_a_s,
            "timestamp_b_s": self.timestamp_b_s,
            "map_point": list(self.map_point),
            "relative_yaw_rad": self.relative_yaw_rad,
            "distance_m": self.distance_m,
            "refined": self.refined,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IntersectionRecord":
        return cls(
            video_a=obj["video_a"],
            video_b=obj["video_b"],
            pose_a=int(obj["pose_a"]),
            pose_b=int(obj["pose_b"]),
            timestamp_a_s=float(obj["timestamp_a_s"]),
            timestamp_b_s=float(obj["timestamp_b_s"]),
            map_point=(float(obj["map_point"][0]), float(obj["map_point"][1])),
            relative_yaw_rad=float(obj["relative_yaw_rad"]),
            distance_m=float(obj["distance_m"]),
            refined=bool(obj["refined"]),
        )


@dataclass
class DetectionParams:
    chunk_len: int = 100
    pad_m: float = 3.0
    ext_len: int = 200
    intersect_threshold_m: float = 5.0
    refine: bool = True
    refine_window: int = 30
    scorer: VisualScorer | None = None


@dataclass
class SearchStats:
    """Counters for the pruning-effectiveness property."""

    distance_evals: int = 0
    candidate_pairs: int = 0


@dataclass
class DetectionResult:
    records: list[IntersectionRecord]
    warnings: list["DetectionWarning"]
    stats: SearchStats


@dataclass(frozen=True)
class DetectionWarning:
    code: str
    message: str
    video_ids: tuple[str, ...] = ()


def decompose_rects(reg: RegisteredTrajectory, chunk_len: int = 100, pad_m: float = 3.0) -> list[ChunkRect]:
    """Cover a trajectory with padded AABBs over consecutive pose chunks."""
    if chunk_len < 2:
        raise ValueError(f"chunk_len must be >= 2, got {chunk_len}")
    if pad_m < 0:
        raise ValueError(f"pad_m must be >= 0, got {pad_m}")
    rects = []
    n = reg.n_poses
    for chunk_index, first in enumerate(range(0, n, chunk_len)):
        last = min(first + chunk_len - 1, n - 1)
        rect = bounds_of(reg.positions[first : last + 1]).inflated(pad_m)
        rects.append(
            ChunkRect(
                video_id=reg.video_id,
                chunk_index=chunk_index,
                pose_range=(first, last),
                bounds=rect,
            )
        )
    return rects


def _endpoint_tangent(positions: np.ndarray, at_start: bool, min_disp_m: float = 1.0) -> np.ndarray | None:
    """Unit vector pointing outward past the first/last pose, or None if degenerate."""
    n = len(positions)
    anchor = positions[0] if at_start else positions[-1]
    indices = range(1, n) if at_start else range(n - 2, -1, -1)
    chosen = None
    for idx in indices:
        delta = anchor - positions[idx]
        if np.hypot(*delta) >= min_disp_m:
            chosen = delta
            break
        chosen = delta if np.hypot(*delta) > 0 else chosen
    if chosen is None:
        return None
    norm = np.hypot(*chosen)
    if norm == 0.0:
        return None
    return chosen / norm


def extend_endpoints(reg: RegisteredTrajectory, ext_len: int = 200, pad_m: float = 3.0) -> list[ChunkRect]:
    """Two extra rectangles that push the search past the path endpoints.

    Each covers the first/last ``min(ext_len, n)`` poses, with its bounds
    stretched along the endpoint tangent by mean spacing x ext_len, so a
    crossing just beyond where the capture stopped still produces a
    rectangle overlap. Extension rects use chunk_index -1 (start) and -2
    (end) so they never collide with regular chunk numbering.
    """
    if ext_len < 1:
        raise ValueError(f"ext_len must be >= 1, got {ext_len}")
    n = reg.n_poses
    span = min(ext_len, n)
    seg = np.hypot(*np.diff(reg.positions, axis=0).T)
    mean_spacing = float(seg.mean()) if len(seg) else 0.0
    reach = mean_spacing * ext_len
    rects = []
    for index, (first, last, at_start) in [
        (-1, (0, span - 1, True)),
        (-2, (n - span, n - 1, False)),
    ]:
        pts = reg.positions[first : last + 1]
        rect = bounds_of(pts)
        tangent = _endpoint_tangent(reg.positions, at_start)
        if tangent is not None and reach > 0:
            anchor = reg.positions[0] if at_start else reg.positions[-1]
            tip = anchor + tangent * reach
            rect = rect.union(Rect(float(tip[0]), float(tip[1]), float(tip[0]), float(tip[1])))
        rects.append(
            ChunkRect(
                video_id=reg.video_id,
                chunk_index=index,
                pose_range=(first, last),
                bounds=rect.inflated(pad_m),
                extended=True,
            )
        )
    return rects


def find_overlapping_pairs(
    rects_a: Sequence[ChunkRect], rects_b: Sequence[ChunkRect]
) -> list[tuple[int, int]]:
    """All (chunk_index_a, chunk_index_b) whose closed bounds intersect."""
    pairs = []
    for ra in rects_a:
        for rb in rects_b:
            if rects_overlap(ra.bounds, rb.bounds):
                pairs.append((ra.chunk_index, rb.chunk_index))
    return pairs


@dataclass(frozen=True)
class _CandidateMin:
    """Minimum of one searched chunk pair."""

    d2: float
    pose_a: int
    pose_b: int
    range_a: tuple[int, int]
    range_b: tuple[int, int]


def _search_candidates(
    reg_a: RegisteredTrajectory,
    reg_b: RegisteredTrajectory,
    candidates: Sequence[tuple[ChunkRect, ChunkRect]],
    stats: SearchStats | None = None,
) -> list[_CandidateMin]:
    """Exhaustive nearest search inside each candidate chunk pair.

    Duplicate pose-range pairs (a regular chunk and an extension rectangle
    can cover the same poses) are searched once.
    """
    seen: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    out: list[_CandidateMin] = []
    pa = reg_a.positions
    pb = reg_b.positions
    for rect_a, rect_b in candidates:
        key = (rect_a.pose_range, rect_b.pose_range)
        if key in seen:
            continue
        seen.add(key)
        (a0, a1), (b0, b1) = key
        ax = pa[a0 : a1 + 1]
        bx = pb[b0 : b1 + 1]
        d2 = ((ax[:, None, :] - bx[None, :, :]) ** 2).sum(axis=2)
        if stats is not None:
            stats.distance_evals += d2.size
            stats.candidate_pairs += 1
        flat = int(np.argmin(d2))  # row-major first minimum = lexicographic tie-break
        i, j = divmod(flat, d2.shape[1])
        out.append(
            _CandidateMin(
                d2=float(d2[i, j]),
                pose_a=a0 + i,
                pose_b=b0 + j,
                range_a=key[0],
                range_b=key[1],
            )
        )
    return out


def nearest_frame_pair(
    reg_a: RegisteredTrajectory,
    reg_b: RegisteredTrajectory,
    candidates: Sequence[tuple[ChunkRect, ChunkRect]],
    stats: SearchStats | None = None,
) -> tuple[int, int, float]:
    """Globally minimal-distance pose pair inside the candidate chunk pairs.

    Ties resolve to the smallest (pose_a, pose_b) lexicographically.
    """
    if not candidates:
        raise ValueError("candidates must be non-empty")
    minima = _search_candidates(reg_a, reg_b, candidates, stats)
    best = min(minima, key=lambda m: (m.d2, m.pose_a, m.pose_b))
    return best.pose_a, best.pose_b, math.sqrt(best.d2)


def refine_visual(
    frames_a: FrameSource,
    frames_b: FrameSource,
    seed: tuple[int, int],
    reg_a: RegisteredTrajectory,
    reg_b: RegisteredTrajectory,
    window: int = 30,
    scorer: VisualScorer | None = None,
) -> tuple[int, int, float]:
    """Pick the most visually similar frame pair near a positional seed.

    Every pose pair within +-window of the seed (clamped at the trajectory
    ends) is scored after rotating frame b into frame a's heading, using
    the registered yaw difference. Ties resolve to the smallest (pose_a,
    pose_b). With window=0 the seed pair is returned with its own score.
    """
    if scorer is None:
        scorer = OrbScorer()
    sa, sb = seed
    a_lo, a_hi = max(0, sa - window), min(reg_a.n_poses - 1, sa + window)
    b_lo, b_hi = max(0, sb - window), min(reg_b.n_poses - 1, sb + window)
    if a_hi < a_lo or b_hi < b_lo:
        raise ValueError("refinement window is empty")

    desc_a: dict[int, object] = {}
    frame_b_cache: dict[int, np.ndarray] = {}
    desc_b: dict[tuple[int, int], object] = {}
    best: tuple[float, int, int] | None = None
    for i in range(a_lo, a_hi + 1):
        if i not in desc_a:
            desc_a[i] = scorer.describe(frames_a.frame(i))
        yaw_a = float(reg_a.yaws[i])
        for j in range(b_lo, b_hi + 1):
            if j not in frame_b_cache:
                frame_b_cache[j] = frames_b.frame(j)
            frame_b = frame_b_cache[j]
            delta = float(wrap_angle(reg_b.yaws[j] - yaw_a))
            shift = equirect_column_shift(-delta, frame_b.shape[1])
            key = (j, shift)
            if key not in desc_b:
                desc_b[key] = scorer.describe(np.roll(frame_b, shift, axis=1))
            score = scorer.similarity(desc_a[i], desc_b[key])
            if best is None or score > best[0]:
                best = (score, i, j)
    assert best is not None
    return best[1], best[2], best[0]


def _cluster_passing_candidates(
    minima: list[_CandidateMin], threshold_m: float, chunk_len: int
) -> list[list[_CandidateMin]]:
    """Group threshold-passing chunk-pair minima into contiguous clusters.

    Candidates cluster by where their minimum actually lies: two minima
    belong together when their pose pairs are within one chunk length on
    both trajectories. Distinct clusters are separate local-minimum regions,
    i.e. separate crossings. (Clustering by the candidates' pose *ranges*
    would let the wide endpoint-extension rectangles chain unrelated
    crossings together.)
    """
    passing = [m for m in minima if math.sqrt(m.d2) <= threshold_m]
    if not passing:
        return []
    clusters: list[list[_CandidateMin]] = []
    assigned = [False] * len(passing)
    for i in range(len(passing)):
        if assigned[i]:
            continue
        stack = [i]
        assigned[i] = True
        group = []
        while stack:
            k = stack.pop()
            group.append(passing[k])
            for m in range(len(passing)):
                if assigned[m]:
                    continue
                if (
                    abs(passing[k].pose_a - passing[m].pose_a) <= chunk_len
                    and abs(passing[k].pose_b - passing[m].pose_b) <= chunk_len
                ):
                    assigned[m] = True
                    stack.append(m)
        clusters.append(group)
    return clusters


def detect_pair(
    reg_a: RegisteredTrajectory,
    reg_b: RegisteredTrajectory,
    frames_a: FrameSource | None,
    frames_b: FrameSource | None,
    params: DetectionParams,
    stats: SearchStats | None = None,
) -> tuple[IntersectionRecord | None, list[DetectionWarning]]:
    """Run the full prune / search / refine pipeline for one ordered video pair."""
    assert reg_a.video_id < reg_b.video_id, "detect_pair expects canonically ordered inputs"
    warnings: list[DetectionWarning] = []
    rects_a = decompose_rects(reg_a, params.chunk_len, params.pad_m) + extend_endpoints(
        reg_a, params.ext_len, params.pad_m
    )
    rects_b = decompose_rects(reg_b, params.chunk_len, params.pad_m) + extend_endpoints(
        reg_b, params.ext_len, params.pad_m
    )
    by_index_a = {r.chunk_index: r for r in rects_a}
    by_index_b = {r.chunk_index: r for r in rects_b}
    index_pairs = find_overlapping_pairs(rects_a, rects_b)
    if not index_pairs:
        return None, warnings
    candidates = [(by_index_a[ia], by_index_b[ib]) for ia, ib in index_pairs]
    minima = _search_candidates(reg_a, reg_b, candidates, stats)
    best = min(minima, key=lambda m: (m.d2, m.pose_a, m.pose_b))
    pose_a, pose_b = best.pose_a, best.pose_b
    refined = False

    clusters = _cluster_passing_candidates(minima, params.intersect_threshold_m, params.chunk_len)
    if len(clusters) > 1:
        warnings.append(
            DetectionWarning(
                code="multi-crossing",
                message=(
                    f"{reg_a.video_id!r} and {reg_b.video_id!r} have {len(clusters)} separate "
                    "near-crossing regions; keeping the best, consider splitting one path"
                ),
                video_ids=(reg_a.video_id, reg_b.video_id),
            )
        )

    if params.refine and frames_a is not None and frames_b is not None:
        scorer = params.scorer if params.scorer is not None else OrbScorer()
        try:
            pose_a, pose_b, _ = refine_visual(
                frames_a, frames_b, (pose_a, pose_b), reg_a, reg_b, params.refine_window, scorer
            )
            refined = True
        except MissingFrameError as exc:
            warnings.append(
                DetectionWarning(
                    code="refine-failed",
                    message=f"visual refinement unavailable for {reg_a.video_id!r}/{reg_b.video_id!r}: {exc}",
                    video_ids=(reg_a.video_id, reg_b.video_id),
                )
            )

    pa = reg_a.positions[pose_a]
    pb = reg_b.positions[pose_b]
    distance = float(np.hypot(*(pa - pb)))
    if distance > params.intersect_threshold_m:
        return None, warnings
    record = IntersectionRecord(
        video_a=reg_a.video_id,
        video_b=reg_b.video_id,
        pose_a=pose_a,
        pose_b=pose_b,
        timestamp_a_s=float(reg_a.timestamps()[pose_a]),
        timestamp_b_s=float(reg_b.timestamps()[pose_b]),
        map_point=(float((pa[0] + pb[0]) / 2.0), float((pa[1] + pb[1]) / 2.0)),
        relative_yaw_rad=float(wrap_angle(reg_b.yaws[pose_b] - reg_a.yaws[pose_a])),
        distance_m=distance,
        refined=refined,
    )
    return record, warnings


def detect_all(
    area: Sequence[RegisteredTrajectory],
    frames: Mapping[str, FrameSource] | None = None,
    params: DetectionParams | None = None,
) -> DetectionResult:
    """Detect the crossing frame pair for every unordered video pair.

    Pairs of the two directions of one street are searched like any other
    pair (they overlap along the whole street and typically record their
    closest approach). Per-pair failures become warnings and do not abort
    the remaining pairs. Records come out sorted by (video_a, video_b).
    """
    if params is None:
        params = DetectionParams()
    regs = sorted(area, key=lambda r: r.video_id)
    ids = [r.video_id for r in regs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate video_id in area")
    records: list[IntersectionRecord] = []
    warnings: list[DetectionWarning] = []
    stats = SearchStats()
    if params.refine and frames is not None and params.scorer is None:
        params = dataclasses.replace(params, scorer=OrbScorer())  # one matcher for all pairs
    for reg_a, reg_b in itertools.combinations(regs, 2):
        fa = frames.get(reg_a.video_id) if frames else None
        fb = frames.get(reg_b.video_id) if frames else None
        try:
            record, pair_warnings = detect_pair(reg_a, reg_b, fa, fb, params, stats)
        except Exception as exc:  # keep scanning the remaining pairs
            logger.exception("detection failed for %s/%s", reg_a.video_id, reg_b.video_id)
            warnings.append(
                DetectionWarning(
                    code="pair-failed",
                    message=f"detection failed for {reg_a.video_id!r}/{reg_b.video_id!r}: {exc}",
                    video_ids=(reg_a.video_id, reg_b.video_id),
                )
            )
            continue
        warnings.extend(pair_warnings)
        if record is not None:
            records.append(record)
    records.sort(key=lambda r: (r.video_a, r.video_b))
    return DetectionResult(records=records, warnings=warnings, stats=stats)
