"""Geometric composition render -> back-project -> rasterize -> compare with GT.

This is the learned-free stand-in for ``M = F_seg(I, D)``: the semantic
panorama plays the role of a perfect image segmenter, so every disagreement
with the analytic ground truth is attributable to geometry.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bev import label_agreement, rasterize_bev
from .config import PipelineConfig
from .io_formats import CalibrationExtrinsic
from .projection import depth_to_points, lidar_to_panorama, transform_points
from .scene import RenderedPanorama, SceneSpec, ground_truth_bev, render_panorama, sparse_lidar_sample
from .spherical import RotationPR, rotate_panorama
from .types import BevGridSpec, SemanticBevMap


def scene_grid(scene: SceneSpec, config: PipelineConfig) -> BevGridSpec:
    """Config grid with the height band capped just below the ceiling (camera frame)."""
    ceiling = scene.room_max[2] - scene.camera[2]
    return replace(config.grid, z_max=min(config.grid.z_max, ceiling - config.ceiling_margin))


@dataclass
class TriangleResult:
    agreement: float
    cells: int
    pred: SemanticBevMap
    gt: SemanticBevMap


def bev_from_panorama(depth, semantic, grid: BevGridSpec) -> SemanticBevMap:
    return rasterize_bev(depth_to_points(depth, semantic), grid)


def consistency_triangle(scene: SceneSpec, config: PipelineConfig, rotation: RotationPR | None = None,
                         render: RenderedPanorama | None = None) -> TriangleResult:
    """Agreement of the dense depth pipeline with the analytic top-down map.

    With ``rotation`` the rendered depth and semantics are perturbed by a
    camera pitch/roll before back-projection, which assumes an upright camera.
    """
    if render is None:
        render = render_panorama(scene, config.pano_height, config.pano_width, config.palette)
    depth, sem = render.depth, render.semantic
    if rotation is not None:
        depth = rotate_panorama(depth, rotation, "nearest", depth=True)
        sem = rotate_panorama(sem, rotation, "nearest")
    grid = scene_grid(scene, config)
    pred = bev_from_panorama(depth, sem, grid)
    gt = ground_truth_bev(scene, config.grid)
    agreement, cells = label_agreement(pred, gt)
    return TriangleResult(agreement, cells, pred, gt)


def default_lidar_extrinsic() -> CalibrationExtrinsic:
    """LiDAR mounted 0.12 m above the camera, yawed by 30 degrees."""
    a = np.radians(30.0)
    R = np.array([[np.cos(a), -np.sin(a), 0.0], [np.sin(a), np.cos(a), 0.0], [0.0, 0.0, 1.0]])
    return CalibrationExtrinsic.from_rt(R, [0.0, 0.0, 0.12])


def lidar_triangle(scene: SceneSpec, config: PipelineConfig,
                   calib: CalibrationExtrinsic | None = None) -> TriangleResult:
    """Sparse path: LiDAR lattice -> extrinsic -> panorama z-buffer -> back-project -> BEV."""
    calib = default_lidar_extrinsic() if calib is None else calib
    origin = np.asarray(scene.camera) + calib.translation
    span = tuple(np.radians(config.lidar_span_deg))
    cam_pts = sparse_lidar_sample(scene, config.lidar_azimuth, config.lidar_elevation, span, origin)
    lidar_pts = transform_points(cam_pts, calib.inverse())
    proj = lidar_to_panorama(lidar_pts, calib, config.pano_height, config.pano_width)
    pred = bev_from_panorama(proj.depth, proj.labels, scene_grid(scene, config))
    gt = ground_truth_bev(scene, config.grid)
    agreement, cells = label_agreement(pred, gt)
    return TriangleResult(agreement, cells, pred, gt)
