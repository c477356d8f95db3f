"""Depth panorama <-> point cloud bridges and the LiDAR-to-panorama z-buffer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bev import grid_index
from .errors import InputError
from .io_formats import CalibrationExtrinsic
from .spherical import cart_to_sph, pixel_to_sph, sph_to_cart, sph_to_pixel
from .types import NO_DATA, NO_LABEL, BevGridSpec, LabeledPointCloud


def valid_depth(depth: np.ndarray) -> np.ndarray:
    return np.isfinite(depth) & (depth > 0)


def depth_to_points(depth: np.ndarray, semantic: np.ndarray | None = None) -> LabeledPointCloud:
    """Back-project every valid pixel along its pixel-center ray (depth = range)."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise InputError(f"depth panorama must be 2-D, got shape {depth.shape}")
    if semantic is not None and np.shape(semantic) != depth.shape:
        raise InputError("semantic panorama must match depth dims")
    h, w = depth.shape
    rows, cols = np.nonzero(valid_depth(depth))
    if rows.size == 0:
        return LabeledPointCloud(np.zeros((0, 3)), None if semantic is None else np.zeros(0, np.uint8),
                                 np.zeros((0, 2), np.int64))
    phi, theta = pixel_to_sph(rows, cols, h, w)
    pts = sph_to_cart(phi, theta, depth[rows, cols])
    labels = None if semantic is None else np.asarray(semantic)[rows, cols]
    return LabeledPointCloud(pts, labels, np.stack([rows, cols], axis=1))


def transform_points(cloud: LabeledPointCloud, T: CalibrationExtrinsic) -> LabeledPointCloud:
    with np.errstate(invalid="ignore", over="ignore"):
        pts = cloud.points @ T.rotation.T + T.translation
    return LabeledPointCloud(pts, cloud.labels, cloud.pixels)


@dataclass
class SparseProjection:
    depth: np.ndarray
    labels: np.ndarray | None
    skipped: int
    hits: int


def lidar_to_panorama(cloud: LabeledPointCloud, T: CalibrationExtrinsic, h: int, w: int
                      ) -> SparseProjection:
    """Project LiDAR points into the camera panorama as sparse range.

    Collisions keep the nearest range; equal ranges keep the earliest point.
    Points at the camera origin or with non-finite coordinates are skipped.
    """
    if h < 2 or w < 2:
        raise InputError("panorama must be at least 2x2")
    pts = transform_points(cloud, T).points
    rng = np.sqrt(np.einsum("ij,ij->i", pts, pts))
    ok = np.isfinite(rng) & (rng > 0)
    skipped = int(len(pts) - ok.sum())
    idx = np.nonzero(ok)[0]
    depth = np.full((h, w), NO_DATA, dtype=np.float64)
    labels = None if cloud.labels is None else np.full((h, w), NO_LABEL, dtype=np.uint8)
    if idx.size == 0:
        return SparseProjection(depth, labels, skipped, 0)
    phi, theta = cart_to_sph(pts[idx])
    row, col = sph_to_pixel(phi, theta, h, w)
    flat = row * w + col
    r = rng[idx]
    # stable sort by (pixel, range, point order); the first of each pixel run wins
    order = np.lexsort((idx, r, flat))
    flat_sorted = flat[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = flat_sorted[1:] != flat_sorted[:-1]
    win = order[first]
    depth.ravel()[flat[win]] = r[win]
    if labels is not None:
        labels.ravel()[flat[win]] = cloud.labels[idx[win]]
    return SparseProjection(depth, labels, skipped, int(win.size))


def mask_valid(cloud: LabeledPointCloud, grid: BevGridSpec) -> np.ndarray:
    """True for finite, positive-range points whose (x, y) falls in the BEV window."""
    p = cloud.points
    finite = np.all(np.isfinite(p), axis=1)
    with np.errstate(invalid="ignore", over="ignore"):
        rng2 = np.einsum("ij,ij->i", p, p)
    _, _, inside = grid_index(p[:, 0], p[:, 1], grid)
    return finite & (rng2 > 0) & inside
