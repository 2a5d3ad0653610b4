"""Procedural equirectangular rendering of a synthetic textured world.

The world is a flat ground plane carrying a meter-scale checker with a
pseudo-random fiducial pattern per cell (hashed from integer cell
coordinates, so the texture is a pure function of world position), under a
skyline silhouette at infinity. Ground texture makes nearby viewpoints
visually distinct, which gives descriptor matching and patch correlation a
real signal; the skyline anchors absolute heading.

Column convention matches the rest of the package: the image center column
is the camera forward direction and content moves toward higher columns as
the camera rotates counter-clockwise, so a camera rotation equals a
horizontal circular pixel shift of the rendered image.
"""
from __future__ import annotations

import math

import numpy as np

EYE_HEIGHT_M = 1.6
_SKY_TOP = np.array([0.36, 0.58, 0.90])
_SKY_HORIZON = np.array([0.78, 0.84, 0.93])
_HORIZON_FADE = np.array([0.62, 0.62, 0.64])
_SKYLINE_BINS = 64


def _mix64(h: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer; deterministic integer hash on uint64 arrays."""
    h = h.astype(np.uint64)
    h ^= h >> np.uint64(30)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(27)
    h *= np.uint64(0x94D049BB133111EB)
    h ^= h >> np.uint64(31)
    return h


def _hash_cells(ix: np.ndarray, iy: np.ndarray, salt: int = 0) -> np.ndarray:
    a = ix.astype(np.int64).astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    b = iy.astype(np.int64).astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
    return _mix64(a + b + np.uint64(salt))


def _unit(h: np.ndarray) -> np.ndarray:
    """Map a uint64 hash to floats in [0, 1)."""
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _ground_color(hx: np.ndarray, hy: np.ndarray) -> np.ndarray:
    """RGB (in [0,1]) of the ground plane at world coordinates (hx, hy)."""
    cx = np.floor(hx)
    cy = np.floor(hy)
    fx = hx - cx
    fy = hy - cy
    icx = cx.astype(np.int64)
    icy = cy.astype(np.int64)

    cell = _hash_cells(icx, icy)
    base = np.stack(
        [
            0.25 + 0.6 * _unit(cell),
            0.25 + 0.6 * _unit(_mix64(cell + np.uint64(1))),
            0.25 + 0.6 * _unit(_mix64(cell + np.uint64(2))),
        ],
        axis=-1,
    )
    # 4x4 fiducial sub-pattern inside each cell: strong corners for features.
    sx = np.minimum((fx * 4).astype(np.int64), 3)
    sy = np.minimum((fy * 4).astype(np.int64), 3)
    sub = _unit(_hash_cells(icx * np.int64(4) + sx, icy * np.int64(4) + sy, salt=7))
    base = base * (0.55 + 0.75 * sub)[..., None]
    # 1 m checker for global contrast.
    checker = ((icx + icy) & 1).astype(np.float64)
    base *= (0.78 + 0.22 * checker)[..., None]
    # Thin grid lines every meter.
    line = (fx < 0.05) | (fx > 0.95) | (fy < 0.05) | (fy > 0.95)
    base[line] = 0.12
    return np.clip(base, 0.0, 1.0)


def _skyline(az: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(height_rad, color) of the building silhouette for each azimuth."""
    frac = (az / (2 * math.pi)) % 1.0
    bins = np.minimum((frac * _SKYLINE_BINS).astype(np.int64), _SKYLINE_BINS - 1)
    h = _hash_cells(bins, np.zeros_like(bins), salt=101)
    height = 0.04 + 0.22 * _unit(h)
    shade = 0.25 + 0.35 * _unit(_mix64(h + np.uint64(5)))
    color = np.stack([shade * 0.9, shade * 0.85, shade], axis=-1)
    return height, color


def render_equirect(
    x_m: float,
    y_m: float,
    yaw_rad: float,
    width: int,
    height: int,
    eye_height_m: float = EYE_HEIGHT_M,
) -> np.ndarray:
    """Render the synthetic world from one camera pose as (H, W, 3) uint8."""
    if width != 2 * height:
        raise ValueError(f"equirectangular frames are 2:1, got {width}x{height}")
    cols = np.arange(width, dtype=np.float64)
    rows = np.arange(height, dtype=np.float64)
    az = yaw_rad + math.pi - 2.0 * math.pi * (cols + 0.5) / width  # (W,)
    el = math.pi / 2 - math.pi * (rows + 0.5) / height  # (H,)

    sin_el = np.sin(el)[:, None]
    cos_el = np.cos(el)[:, None]
    cos_az = np.cos(az)[None, :]
    sin_az = np.sin(az)[None, :]

    img = np.empty((height, width, 3), dtype=np.float64)

    # Upper hemisphere: sky gradient with a skyline silhouette at infinity.
    sky_mix = np.clip(el / (math.pi / 2), 0.0, 1.0)[:, None, None]
    img[:] = _SKY_HORIZON * (1 - sky_mix) + _SKY_TOP * sky_mix
    skyline_h, skyline_c = _skyline(az)
    building = (el[:, None] >= 0) & (el[:, None] < skyline_h[None, :])
    img[building] = np.broadcast_to(skyline_c[None, :, :], img.shape)[building]

    # Lower hemisphere: ray-cast the ground plane.
    below = sin_el[:, 0] < 0
    if np.any(below):
        t = -eye_height_m / sin_el[below]  # (Hb, 1)
        hx = x_m + t * cos_el[below] * cos_az
        hy = y_m + t * cos_el[below] * sin_az
        ground = _ground_color(hx, hy)
        fade = np.clip(30.0 / (30.0 + t), 0.0, 1.0)[..., None]
        img[below] = ground * fade + _HORIZON_FADE * (1 - fade)

    return (np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
