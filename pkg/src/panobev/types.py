"""Core data carriers passed between the geometry, projection and BEV stages.

Panoramas are plain numpy arrays:

* depth panorama: ``(H, W)`` float, Euclidean range in meters, ``NO_DATA`` (0.0)
  where there is no return;
* semantic panorama: ``(H, W)`` uint8 class ids, ``NO_LABEL`` (255) where unknown;
* RGB panorama: ``(H, W, 3)`` uint8.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

NO_DATA = 0.0
NO_LABEL = 255
UNOBSERVED = 255

# Indoor category order: void followed by 20 object and structure classes.
CLASS_NAMES = (
    "void", "wall", "floor", "chair", "door", "table", "picture", "furniture",
    "objects", "window", "sofa", "bed", "sink", "stairs", "ceiling", "toilet",
    "mirror", "shower", "bathtub", "counter", "shelving",
)
VOID, WALL, FLOOR, CEILING = 0, 1, 2, 14
NUM_CLASSES = len(CLASS_NAMES)


@dataclass
class LabeledPointCloud:
    """Points in meters with optional per-point class label and source pixel."""

    points: np.ndarray
    labels: np.ndarray | None = None
    pixels: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        n = len(self.points)
        if self.labels is not None:
            self.labels = np.asarray(self.labels).astype(np.uint8, copy=False).reshape(-1)
            if len(self.labels) != n:
                raise InputError(f"{len(self.labels)} labels for {n} points")
        if self.pixels is not None:
            self.pixels = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
            if len(self.pixels) != n:
                raise InputError(f"{len(self.pixels)} pixel indices for {n} points")

    def __len__(self):
        return len(self.points)

    def subset(self, keep: np.ndarray) -> "LabeledPointCloud":
        return LabeledPointCloud(
            self.points[keep],
            None if self.labels is None else self.labels[keep],
            None if self.pixels is None else self.pixels[keep],
        )


@dataclass(frozen=True)
class BevGridSpec:
    """Sensor-centered metric grid. Columns index x (forward), rows index y (left).

    Points are kept only inside the half-open window ``[-range/2, range/2)`` on
    each axis and inside the height band ``[z_min, z_max)``.
    """

    cells_x: int = 500
    cells_y: int = 500
    range_x: float = 10.0
    range_y: float = 10.0
    z_min: float = -np.inf
    z_max: float = np.inf

    def __post_init__(self):
        if self.cells_x <= 0 or self.cells_y <= 0:
            raise InputError("grid cell counts must be positive")
        if not (self.range_x > 0 and self.range_y > 0):
            raise InputError("grid ranges must be positive")

    @property
    def res_x(self) -> float:
        return self.range_x / self.cells_x

    @property
    def res_y(self) -> float:
        return self.range_y / self.cells_y

    @property
    def shape(self) -> tuple[int, int]:
        return (self.cells_y, self.cells_x)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Metric (x, y) of every cell center, each shaped ``(cells_y, cells_x)``."""
        xs = (np.arange(self.cells_x) + 0.5) * self.res_x - self.range_x / 2
        ys = (np.arange(self.cells_y) + 0.5) * self.res_y - self.range_y / 2
        return np.meshgrid(xs, ys)


@dataclass
class SemanticBevMap:
    """Label grid with occupancy mask and per-cell max height (meters).

    Unobserved cells carry ``UNOBSERVED`` in ``labels`` and 0.0 in ``heights``.
    """

    labels: np.ndarray
    mask: np.ndarray
    heights: np.ndarray = field(default=None)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.heights is None:
            self.heights = np.zeros(self.labels.shape, dtype=np.float32)
        self.heights = np.asarray(self.heights, dtype=np.float32)
        if not (self.labels.shape == self.mask.shape == self.heights.shape):
            raise InputError("labels, mask and heights must share one shape")

    @classmethod
    def empty(cls, shape: tuple[int, int]) -> "SemanticBevMap":
        return cls(np.full(shape, UNOBSERVED, np.uint8), np.zeros(shape, bool),
                   np.zeros(shape, np.float32))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def copy(self) -> "SemanticBevMap":
        return SemanticBevMap(self.labels.copy(), self.mask.copy(), self.heights.copy())

    def equals(self, other: "SemanticBevMap") -> bool:
        return (np.array_equal(self.labels, other.labels)
                and np.array_equal(self.mask, other.mask)
                and np.array_equal(self.heights, other.heights))
