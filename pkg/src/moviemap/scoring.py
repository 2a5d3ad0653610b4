"""Frame access and pluggable visual-similarity scoring.

Scorers split work into ``describe`` (per-frame, cacheable) and
``similarity`` (per-pair) so a windowed search does not recompute features
for every pair. Two implementations are provided:

* OrbScorer — oriented-FAST/BRIEF binary descriptors; similarity is the
  number of mutual-best matches under Hamming distance. Realistic, and the
  default for detection.
* PatchCorrelationScorer — normalized correlation of a downsampled gray
  patch. Fully deterministic and dependency-light; the CI fallback.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Protocol

import numpy as np


class FrameSource(Protocol):
    """Read-only access to the equirectangular frames of one video, by pose ordinal."""

    def frame(self, pose_index: int) -> np.ndarray:
        """Return the frame as an (H, W, 3) uint8 RGB array."""
        ...


class MissingFrameError(FileNotFoundError):
    pass


class DirectoryFrameSource:
    """Frames stored as ``{pose:06d}.png`` files in one directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def frame(self, pose_index: int) -> np.ndarray:
        from PIL import Image

        path = self.directory / f"{pose_index:06d}.png"
        if not path.exists():
            raise MissingFrameError(str(path))
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))


class ArrayFrameSource:
    """In-memory frame list, for tests and the fixture generator."""

    def __init__(self, frames: list[np.ndarray] | dict[int, np.ndarray]):
        self._frames = frames

    def frame(self, pose_index: int) -> np.ndarray:
        try:
            return self._frames[pose_index]
        except (IndexError, KeyError):
            raise MissingFrameError(f"pose {pose_index}") from None


class VisualScorer(Protocol):
    """Similarity between two already-aligned equirectangular frames."""

    def describe(self, frame: np.ndarray) -> Any:
        ...

    def similarity(self, desc_a: Any, desc_b: Any) -> float:
        ...


def to_gray(frame: np.ndarray) -> np.ndarray:
    """Integer luma approximation, uint8."""
    f = frame.astype(np.uint16)
    return ((77 * f[..., 0] + 150 * f[..., 1] + 29 * f[..., 2]) >> 8).astype(np.uint8)


class OrbScorer:
    """Mutual-best binary-descriptor match count.

    Matching is mutual-best (cross-checked) rather than ratio-tested: the
    count of reciprocal nearest descriptors is a simple, monotone similarity
    for near-identical viewpoints.
    """

    def __init__(self, n_features: int = 500):
        import cv2

        self._orb = cv2.ORB_create(nfeatures=n_features)
        self._matcher = cv2.BFMatcher(cv2.NORM_HAMMING, crossCheck=True)

    def describe(self, frame: np.ndarray):
        gray = to_gray(frame)
        _, descriptors = self._orb.detectAndCompute(gray, None)
        return descriptors

    def similarity(self, desc_a, desc_b) -> float:
        if desc_a is None or desc_b is None or len(desc_a) == 0 or len(desc_b) == 0:
            return 0.0
        return float(len(self._matcher.match(desc_a, desc_b)))


class PatchCorrelationScorer:
    """Pearson correlation of a block-averaged grayscale thumbnail."""

    def __init__(self, patch_width: int = 64, patch_height: int = 32):
        self.patch_width = patch_width
        self.patch_height = patch_height

    def describe(self, frame: np.ndarray) -> np.ndarray:
        gray = to_gray(frame).astype(np.float64)
        h, w = gray.shape
        bh = max(1, h // self.patch_height)
        bw = max(1, w // self.patch_width)
        th, tw = h // bh, w // bw
        patch = gray[: th * bh, : tw * bw].reshape(th, bh, tw, bw).mean(axis=(1, 3))
        flat = patch.ravel()
        flat = flat - flat.mean()
        norm = np.linalg.norm(flat)
        if norm == 0.0:
            return flat
        return flat / norm

    def similarity(self, desc_a: np.ndarray, desc_b: np.ndarray) -> float:
        return float(np.dot(desc_a, desc_b))
