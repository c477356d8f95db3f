"""Cartesian / spherical / equirectangular-pixel transforms and pitch-roll noise.

Camera frame: x forward, y left, z up. Azimuth ``phi = atan2(y, x)``; polar
angle ``theta`` is measured from +z, so row 0 of a panorama is the zenith.

Pixel indexing follows the ceiling formula

    I_h = ceil(H * theta / pi),   I_w = ceil((phi / pi - 1 / W) * W / 2)

with ``phi`` in ``[0, 2pi)``, shifted to 0-based indices: rows are clamped to
``[0, H-1]`` and columns wrap modulo ``W``. Under this layout column ``c``
is centered on azimuth ``(c + 1) * 2pi / W`` and row ``r`` on polar angle
``(r + 0.5) * pi / H``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InputError, ModeError

TWO_PI = 2.0 * np.pi


def wrap_2pi(phi):
    """Map angles into ``[0, 2pi)``."""
    out = np.mod(phi, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


def wrap_pi(phi):
    """Map angles into ``(-pi, pi]``."""
    out = wrap_2pi(phi)
    return np.where(out > np.pi, out - TWO_PI, out)


def cart_to_sph(points):
    """Return ``(phi, theta)`` for points shaped ``(..., 3)``.

    phi is in ``(-pi, pi]``, theta in ``[0, pi]``.
    """
    p = np.asarray(points, dtype=np.float64)
    if p.shape[-1] != 3:
        raise InputError(f"points must have a trailing dimension of 3, got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InputError("non-finite point coordinates")
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    rho = np.hypot(x, y)
    if np.any((rho == 0) & (z == 0)):
        raise DegenerateInputError("zero vector has no direction")
    return np.arctan2(y, x), np.arctan2(rho, z)


def sph_to_cart(phi, theta, r=1.0):
    """Point at radius ``r`` along direction ``(phi, theta)``; shape ``(..., 3)``."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(~(r > 0)):
        raise InputError("radius must be positive")
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    s = np.sin(theta)
    return np.stack([r * s * np.cos(phi), r * s * np.sin(phi), r * np.cos(theta)], axis=-1)


def _check_extent(H, W):
    if int(H) <= 0 or int(W) <= 0:
        raise InputError(f"feature-map extents must be positive, got H={H}, W={W}")


def raw_ceil_index(phi, theta, H, W):
    """Raw ceiling indices ``(I_h, I_w)`` before the 0-based shift.

    ``phi`` is normalized into ``[0, 2pi)`` first.
    """
    _check_extent(H, W)
    phi = wrap_2pi(np.asarray(phi, dtype=np.float64))
    theta = np.asarray(theta, dtype=np.float64)
    ih = np.ceil(H * theta / np.pi)
    iw = np.ceil((phi / np.pi - 1.0 / W) * W / 2)
    return ih.astype(np.int64), iw.astype(np.int64)


def sph_to_pixel(phi, theta, H, W):
    """0-based ``(row, col)`` integer indices for spherical angles."""
    ih, iw = raw_ceil_index(phi, theta, H, W)
    row = np.clip(ih - 1, 0, H - 1)
    col = np.mod(iw - 1, W)
    return row, col


def pixel_to_sph(row, col, H, W):
    """Pixel-center ``(phi, theta)``; phi in ``(-pi, pi]``.

    The azimuth is built from the signed column step ``k`` in ``(-W/2, W/2]``
    so that mirrored columns get exactly negated angles.
    """
    _check_extent(H, W)
    row = np.asarray(row)
    col = np.asarray(col)
    if np.any((row < 0) | (row >= H) | (col < 0) | (col >= W)):
        raise InputError("pixel index out of bounds")
    theta = (row + 0.5) * (np.pi / H)
    k = np.mod(col + 1, W)
    k = np.where(2 * k > W, k - W, k)
    phi = k * (TWO_PI / W)
    return phi, theta


def pixel_directions(H, W):
    """Unit ray direction for every pixel center, shaped ``(H, W, 3)``."""
    rows, cols = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    phi, theta = pixel_to_sph(rows, cols, H, W)
    return sph_to_cart(phi, theta)


# --- pitch / roll perturbation -------------------------------------------------

@dataclass(frozen=True)
class RotationPR:
    """Camera perturbation ``R(pitch, roll, 0)`` = ``R_roll @ R_pitch``.

    Pitch rotates about the left (y) axis, roll about the forward (x) axis.
    """

    pitch: float
    roll: float
    matrix: np.ndarray


def rotation_pr(pitch: float, roll: float) -> RotationPR:
    if not (np.isfinite(pitch) and np.isfinite(roll)):
        raise InputError("rotation angles must be finite")
    ca, sa = np.cos(pitch), np.sin(pitch)
    cb, sb = np.cos(roll), np.sin(roll)
    r_pitch = np.array([[ca, 0.0, sa], [0.0, 1.0, 0.0], [-sa, 0.0, ca]])
    r_roll = np.array([[1.0, 0.0, 0.0], [0.0, cb, -sb], [0.0, sb, cb]])
    m = r_roll @ r_pitch
    m.setflags(write=False)
    return RotationPR(float(pitch), float(roll), m)


def _bilinear_pano(img, fr, fc):
    """Sample ``img`` (H, W, ...) at fractional pixel coords; cols wrap, rows clamp."""
    H, W = img.shape[:2]
    r0 = np.floor(fr).astype(np.int64)
    c0 = np.floor(fc).astype(np.int64)
    wr = fr - r0
    wc = fc - c0
    r1 = np.clip(r0 + 1, 0, H - 1)
    r0 = np.clip(r0, 0, H - 1)
    c1 = np.mod(c0 + 1, W)
    c0 = np.mod(c0, W)
    src = img.astype(np.float64)
    extra = (slice(None),) + (None,) * (img.ndim - 2)
    wr, wc = wr[extra], wc[extra]
    top = src[r0, c0] * (1 - wc) + src[r0, c1] * wc
    bot = src[r1, c0] * (1 - wc) + src[r1, c1] * wc
    return top * (1 - wr) + bot * wr


def rotate_panorama(img, rot, interp: str = "nearest", depth: bool = False):
    """Resample a panorama as seen by a camera rotated by ``rot``.

    ``rot`` is a :class:`RotationPR` or any 3x3 rotation matrix. Output pixel
    ``(r, c)`` takes the input sample along ``rot.T @ dir(r, c)``. Depth (and
    label) panoramas must use nearest interpolation.
    """
    m = rot.matrix if isinstance(rot, RotationPR) else np.asarray(rot, dtype=np.float64)
    if m.shape != (3, 3):
        raise InputError(f"rotation must be 3x3, got {m.shape}")
    img = np.asarray(img)
    if img.ndim < 2 or img.shape[0] < 2 or img.shape[1] < 2:
        raise InputError("panorama must be at least 2x2")
    if interp not in ("nearest", "bilinear"):
        raise ModeError(f"unknown interpolation {interp!r}")
    if depth and interp != "nearest":
        raise ModeError("depth panoramas must be resampled with nearest interpolation")
    H, W = img.shape[:2]
    dirs = pixel_directions(H, W).reshape(-1, 3)
    src = dirs @ m  # row-vector form of rot.T @ d
    phi, theta = cart_to_sph(src)
    if interp == "nearest":
        rows, cols = sph_to_pixel(phi, theta, H, W)
        return img[rows, cols].reshape(img.shape)
    fr = theta * H / np.pi - 0.5
    fc = wrap_2pi(phi) * W / TWO_PI - 1.0
    out = _bilinear_pano(img, fr, fc).reshape(img.shape)
    if np.issubdtype(img.dtype, np.integer):
        info = np.iinfo(img.dtype)
        out = np.clip(np.floor(out + 0.5), info.min, info.max)
    return out.astype(img.dtype)


def yaw_roll_columns(img, yaw: float):
    """Rotate a panorama about +z by a whole number of columns (test helper)."""
    W = img.shape[1]
    k = int(round(yaw * W / TWO_PI))
    return np.roll(img, k, axis=1), k * TWO_PI / W
