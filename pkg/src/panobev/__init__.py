"""Panorama/LiDAR geometry core for BEV semantic mapping."""

from .types import (CLASS_NAMES, NO_DATA, NO_LABEL, NUM_CLASSES, UNOBSERVED, BevGridSpec,
                    LabeledPointCloud, SemanticBevMap)

__all__ = ["BevGridSpec", "LabeledPointCloud", "SemanticBevMap", "CLASS_NAMES", "NUM_CLASSES",
           "NO_DATA", "NO_LABEL", "UNOBSERVED"]
__version__ = "0.1.0"
