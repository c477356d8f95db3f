"""Analytic box-room scenes: ray-cast panoramas, sparse LiDAR lattices, exact GT BEV.

World frame is axis-aligned with the camera frame (x forward, y left, z up)
and only translated by the camera position, so ray directions are shared.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, SceneError
from .spherical import pixel_directions
from .threads import thread_cap
from .types import (CEILING, FLOOR, NO_DATA, NUM_CLASSES, UNOBSERVED, WALL, BevGridSpec,
                    LabeledPointCloud, SemanticBevMap)

# Box classes drawn by random_scene: everything except void and the room surfaces.
OBJECT_CLASSES = tuple(k for k in range(3, NUM_CLASSES) if k != CEILING)


@dataclass(frozen=True)
class Box:
    min: tuple[float, float, float]
    max: tuple[float, float, float]
    label: int


@dataclass(frozen=True)
class SceneSpec:
    room_min: tuple[float, float, float]
    room_max: tuple[float, float, float]
    camera: tuple[float, float, float]
    boxes: tuple[Box, ...] = field(default_factory=tuple)
    classes: int = NUM_CLASSES

    def __post_init__(self):
        lo, hi, cam = (np.asarray(v, float) for v in (self.room_min, self.room_max, self.camera))
        if lo.shape != (3,) or hi.shape != (3,) or cam.shape != (3,):
            raise SceneError("room corners and camera must be 3-vectors")
        if not np.all(lo < hi):
            raise SceneError("room min must be below room max on every axis")
        if not np.all((cam > lo) & (cam < hi)):
            raise SceneError("camera must be strictly inside the room")
        if not 1 <= self.classes <= 255:
            raise SceneError("class count must be in 1..255")
        for b in self.boxes:
            blo, bhi = np.asarray(b.min, float), np.asarray(b.max, float)
            if not np.all(blo < bhi):
                raise SceneError(f"degenerate box {b}")
            if np.any(blo < lo) or np.any(bhi > hi):
                raise SceneError(f"box {b} leaves the room")
            if not 0 <= b.label < self.classes:
                raise SceneError(f"box class {b.label} >= {self.classes}")
            if np.all((cam >= blo) & (cam <= bhi)):
                raise SceneError("camera is inside a box")

    @property
    def camera_height(self) -> float:
        return self.camera[2] - self.room_min[2]

    def to_dict(self) -> dict:
        return {"room": {"min": list(self.room_min), "max": list(self.room_max)},
                "boxes": [{"min": list(b.min), "max": list(b.max), "class": b.label}
                          for b in self.boxes],
                "camera": list(self.camera), "classes": self.classes}

    @classmethod
    def from_dict(cls, obj) -> "SceneSpec":
        try:
            boxes = tuple(Box(tuple(map(float, b["min"])), tuple(map(float, b["max"])),
                              int(b["class"])) for b in obj.get("boxes", []))
            return cls(tuple(map(float, obj["room"]["min"])), tuple(map(float, obj["room"]["max"])),
                       tuple(map(float, obj["camera"])), boxes, int(obj.get("classes", NUM_CLASSES)))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise FormatError(f"malformed scene description: {exc!r}") from None


def load_scene(path) -> SceneSpec:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    return SceneSpec.from_dict(obj)


def save_scene(scene: SceneSpec, path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=2) + "\n")


# --- ray casting -------------------------------------------------------------------

def _slabs(origin, dirs, lo, hi):
    """Per-axis entry/exit parameters for rays against an AABB, shaped (N, 3)."""
    t0 = np.empty(dirs.shape)
    t1 = np.empty(dirs.shape)
    for a in range(3):
        d = dirs[:, a]
        par = d == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo[a] - origin[a]) / d
            tb = (hi[a] - origin[a]) / d
        t0[:, a] = np.minimum(ta, tb)
        t1[:, a] = np.maximum(ta, tb)
        if par.any():
            inside = lo[a] <= origin[a] <= hi[a]
            t0[par, a] = -np.inf if inside else np.inf
            t1[par, a] = np.inf if inside else -np.inf
    return t0, t1


def cast_rays(scene: SceneSpec, dirs: np.ndarray, origin=None):
    """Nearest hit range and class along unit ``dirs`` from ``origin`` (default camera)."""
    o = np.asarray(scene.camera if origin is None else origin, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    t0, t1 = _slabs(o, dirs, np.asarray(scene.room_min, float), np.asarray(scene.room_max, float))
    axis = np.argmin(t1, axis=1)
    best = t1[np.arange(len(dirs)), axis]
    label = np.full(len(dirs), WALL, dtype=np.uint8)
    dz = dirs[:, 2]
    label[(axis == 2) & (dz < 0)] = FLOOR
    label[(axis == 2) & (dz > 0)] = CEILING
    for b in scene.boxes:
        b0, b1 = _slabs(o, dirs, np.asarray(b.min, float), np.asarray(b.max, float))
        near = b0.max(axis=1)
        far = b1.min(axis=1)
        hit = (near <= far) & (near > 0) & (near < best)
        best = np.where(hit, near, best)
        label[hit] = b.label
    return best, label


@dataclass
class RenderedPanorama:
    semantic: np.ndarray
    depth: np.ndarray
    rgb: np.ndarray


def render_panorama(scene: SceneSpec, h: int, w: int, palette=None) -> RenderedPanorama:
    """Ray-cast every pixel center; depth is Euclidean range in meters."""
    from .config import DEFAULT_PALETTE

    palette = np.asarray(DEFAULT_PALETTE if palette is None else palette, dtype=np.uint8)
    dirs = pixel_directions(h, w)
    depth = np.empty((h, w), dtype=np.float64)
    sem = np.empty((h, w), dtype=np.uint8)
    n_workers = max(1, min(thread_cap(), h))
    bounds = np.linspace(0, h, n_workers + 1).astype(int)

    def work(i):
        a, b = bounds[i], bounds[i + 1]
        rng, lab = cast_rays(scene, dirs[a:b].reshape(-1, 3))
        depth[a:b] = rng.reshape(b - a, w)
        sem[a:b] = lab.reshape(b - a, w)

    if n_workers == 1:
        work(0)
    else:
        with ThreadPoolExecutor(n_workers) as ex:
            list(ex.map(work, range(n_workers)))
    rgb = palette[np.minimum(sem, len(palette) - 1)]
    return RenderedPanorama(sem, depth, rgb)


def sparse_lidar_sample(scene: SceneSpec, n_azimuth: int, n_elevation: int,
                        elevation_span=(np.radians(-60.0), np.radians(15.0)),
                        origin=None) -> LabeledPointCloud:
    """Ray-cast a regular azimuth x elevation lattice; points in the camera frame.

    ``origin`` (world frame) defaults to the camera; elevation is measured up
    from the horizontal plane.
    """
    if n_azimuth < 1 or n_elevation < 1:
        raise SceneError("lattice counts must be >= 1")
    az = np.arange(n_azimuth) * (2 * np.pi / n_azimuth)
    lo, hi = elevation_span
    el = np.linspace(lo, hi, n_elevation) if n_elevation > 1 else np.array([lo])
    E, A = np.meshgrid(el, az, indexing="ij")
    dirs = np.stack([np.cos(E) * np.cos(A), np.cos(E) * np.sin(A), np.sin(E)], axis=-1).reshape(-1, 3)
    o = np.asarray(scene.camera if origin is None else origin, dtype=np.float64)
    rng, lab = cast_rays(scene, dirs, o)
    ok = np.isfinite(rng) & (rng > 0)
    pts = o + dirs[ok] * rng[ok, None] - np.asarray(scene.camera, dtype=np.float64)
    return LabeledPointCloud(pts, lab[ok])


def ground_truth_bev(scene: SceneSpec, spec: BevGridSpec) -> SemanticBevMap:
    """Top-down label at every cell center inside the room footprint.

    Heights are measured above the room floor.
    """
    cx, cy = spec.cell_centers()
    wx = cx + scene.camera[0]
    wy = cy + scene.camera[1]
    lo, hi = scene.room_min, scene.room_max
    inside = (wx >= lo[0]) & (wx < hi[0]) & (wy >= lo[1]) & (wy < hi[1])
    labels = np.full(spec.shape, UNOBSERVED, dtype=np.uint8)
    heights = np.zeros(spec.shape, dtype=np.float64)
    labels[inside] = FLOOR
    for b in scene.boxes:
        cover = inside & (wx >= b.min[0]) & (wx < b.max[0]) & (wy >= b.min[1]) & (wy < b.max[1])
        top = b.max[2] - lo[2]
        # the floor sits at height 0 and every box top is above it
        better = cover & ((top > heights) | ((top == heights) & (labels < b.label)))
        labels[better] = b.label
        heights[better] = top
    return SemanticBevMap(labels, inside, heights)


def random_scene(seed: int, max_boxes: int = 6, window: float = 10.0) -> SceneSpec:
    """Seeded box room with the camera near the middle and boxes inside the window."""
    rng = np.random.default_rng(seed)
    size = np.array([rng.uniform(6.0, 13.0), rng.uniform(6.0, 13.0), rng.uniform(2.6, 3.2)])
    cam = np.array([rng.uniform(0.35, 0.65) * size[0], rng.uniform(0.35, 0.65) * size[1],
                    rng.uniform(1.2, 1.7)])
    half = window / 2 - 0.3
    boxes = []
    n = int(rng.integers(2, max_boxes + 1))
    attempts = 0
    while len(boxes) < n and attempts < 200:
        attempts += 1
        dims = np.array([rng.uniform(0.4, 1.6), rng.uniform(0.4, 1.6), rng.uniform(0.3, 1.1)])
        c = cam[:2] + rng.uniform(-half, half, size=2)
        lo = np.array([c[0] - dims[0] / 2, c[1] - dims[1] / 2, 0.0])
        hi = np.array([c[0] + dims[0] / 2, c[1] + dims[1] / 2, dims[2]])
        if np.any(lo[:2] < 0.05) or np.any(hi[:2] > size[:2] - 0.05):
            continue
        # keep 0.3 m clearance around the camera column
        if np.all((cam[:2] > lo[:2] - 0.3) & (cam[:2] < hi[:2] + 0.3)):
            continue
        label = int(rng.choice(OBJECT_CLASSES))
        boxes.append(Box(tuple(lo.tolist()), tuple(hi.tolist()), label))
    return SceneSpec((0.0, 0.0, 0.0), tuple(size.tolist()), tuple(cam.tolist()), tuple(boxes))
