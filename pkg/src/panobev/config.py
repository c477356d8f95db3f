"""Pipeline configuration and the default class palette."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .types import BevGridSpec

# One RGB triple per class id in CLASS_NAMES order (void first).
DEFAULT_PALETTE = (
    (0, 0, 0),        # void
    (174, 199, 232),  # wall
    (152, 223, 138),  # floor
    (31, 119, 180),   # chair
    (255, 187, 120),  # door
    (188, 189, 34),   # table
    (140, 86, 75),    # picture
    (255, 152, 150),  # furniture
    (214, 39, 40),    # objects
    (197, 176, 213),  # window
    (148, 103, 189),  # sofa
    (196, 156, 148),  # bed
    (23, 190, 207),   # sink
    (247, 182, 210),  # stairs
    (219, 219, 141),  # ceiling
    (255, 127, 14),   # toilet
    (158, 218, 229),  # mirror
    (44, 160, 44),    # shower
    (112, 128, 144),  # bathtub
    (227, 119, 194),  # counter
    (82, 84, 163),    # shelving
)
UNOBSERVED_COLOR = (255, 255, 255)


def colorize_labels(labels: np.ndarray, palette=DEFAULT_PALETTE) -> np.ndarray:
    """Class-palette RGB image; ids outside the palette render white."""
    table = np.full((256, 3), UNOBSERVED_COLOR, dtype=np.uint8)
    pal = np.asarray(palette, dtype=np.uint8)
    table[: len(pal)] = pal
    return table[np.asarray(labels, dtype=np.uint8)]


@dataclass
class PipelineConfig:
    grid: BevGridSpec = field(default_factory=BevGridSpec)
    pano_height: int = 512
    pano_width: int = 1024
    palette: tuple = DEFAULT_PALETTE
    # points this close below the ceiling are dropped before rasterizing
    ceiling_margin: float = 0.05
    lidar_azimuth: int = 720
    lidar_elevation: int = 48
    lidar_span_deg: tuple = (-60.0, 15.0)
    min_agreement: float = 0.95
    min_lidar_agreement: float = 0.90

    def __post_init__(self):
        if self.pano_height < 2 or self.pano_width < 2:
            raise InputError("panorama dims must be >= 2")
        if not 0 <= self.min_agreement <= 1 or not 0 <= self.min_lidar_agreement <= 1:
            raise InputError("agreement thresholds must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["palette"] = [list(c) for c in self.palette]
        d["lidar_span_deg"] = list(self.lidar_span_deg)
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise FormatError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(obj)
        if "grid" in kw:
            kw["grid"] = BevGridSpec(**kw["grid"])
        if "palette" in kw:
            kw["palette"] = tuple(tuple(int(v) for v in c) for c in kw["palette"])
        if "lidar_span_deg" in kw:
            kw["lidar_span_deg"] = tuple(float(v) for v in kw["lidar_span_deg"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise FormatError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
