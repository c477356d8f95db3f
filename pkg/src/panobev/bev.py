"""BEV rasterization and segmentation metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyEvaluationError, InputError, MissingLabelError
from .types import UNOBSERVED, VOID, BevGridSpec, LabeledPointCloud, SemanticBevMap


def grid_index(x, y, spec: BevGridSpec):
    """Cell ``(row, col)`` of metric ``(x, y)`` plus an inside flag.

    Cells are half-open ``[lo, hi)``; indices are only meaningful where inside.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        fc = np.floor((x + spec.range_x / 2) / spec.res_x)
        fr = np.floor((y + spec.range_y / 2) / spec.res_y)
        inside = (fc >= 0) & (fc < spec.cells_x) & (fr >= 0) & (fr < spec.cells_y)
    col = np.where(inside, fc, -1).astype(np.int64)
    row = np.where(inside, fr, -1).astype(np.int64)
    return row, col, inside


def in_window(points: np.ndarray, spec: BevGridSpec) -> np.ndarray:
    _, _, inside = grid_index(points[:, 0], points[:, 1], spec)
    z = points[:, 2]
    with np.errstate(invalid="ignore"):
        return inside & (z >= spec.z_min) & (z < spec.z_max)


def rasterize_bev(cloud: LabeledPointCloud, spec: BevGridSpec) -> SemanticBevMap:
    """Per cell: highest point's z and label; ties go to the larger class id."""
    if cloud.labels is None:
        raise MissingLabelError("rasterize_bev needs per-point labels")
    bev = SemanticBevMap.empty(spec.shape)
    if len(cloud) == 0:
        return bev
    p = cloud.points
    row, col, inside = grid_index(p[:, 0], p[:, 1], spec)
    with np.errstate(invalid="ignore"):
        keep = inside & np.isfinite(p[:, 2]) & (p[:, 2] >= spec.z_min) & (p[:, 2] < spec.z_max)
    if not keep.any():
        return bev
    flat = (row[keep] * spec.cells_x + col[keep])
    z = p[keep, 2]
    lab = cloud.labels[keep]
    # last element of each cell run after sorting by (cell, z, label) is the winner
    order = np.lexsort((lab, z, flat))
    fs = flat[order]
    last = np.ones(fs.size, dtype=bool)
    last[:-1] = fs[1:] != fs[:-1]
    win = order[last]
    cells = flat[win]
    bev.labels.ravel()[cells] = lab[win]
    bev.mask.ravel()[cells] = True
    bev.heights.ravel()[cells] = z[win]
    return bev


# --- metrics ----------------------------------------------------------------------

@dataclass
class MetricsReport:
    acc: float
    m_recall: float
    m_precision: float
    m_iou: float
    iou: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    present: np.ndarray
    confusion: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        per_class = []
        for k in range(len(self.iou)):
            if self.present[k]:
                per_class.append({"class": k, "iou": float(self.iou[k]),
                                  "precision": float(self.precision[k]),
                                  "recall": float(self.recall[k]),
                                  "support": int(self.confusion[k].sum())})
            else:
                per_class.append({"class": k, "iou": None, "precision": None,
                                  "recall": None, "support": 0})
        return {"acc": float(self.acc), "mRecall": float(self.m_recall),
                "mPrecision": float(self.m_precision), "mIoU": float(self.m_iou),
                "per_class": per_class}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _as_labels(m):
    if isinstance(m, SemanticBevMap):
        return np.where(m.mask, m.labels, UNOBSERVED).astype(np.int64)
    return np.asarray(m).astype(np.int64)


def confusion_matrix(pred, gt, num_classes: int, include_void: bool = True) -> np.ndarray:
    """``L x (L + 1)`` counts over gt-observed cells; the last column counts
    cells where the prediction is unobserved or out of range."""
    p = _as_labels(pred)
    g = _as_labels(gt)
    if p.shape != g.shape:
        raise InputError(f"prediction {p.shape} and ground truth {g.shape} differ in shape")
    L = int(num_classes)
    ev = (g >= 0) & (g < L)
    if not include_void:
        ev &= g != VOID
    g = g[ev]
    p = p[ev]
    p = np.where((p >= 0) & (p < L), p, L)
    return np.bincount(g * (L + 1) + p, minlength=L * (L + 1)).reshape(L, L + 1)


def bev_metrics(pred, gt, num_classes: int, include_void: bool = True) -> MetricsReport:
    """Acc / mRecall / mPrecision / mIoU over cells observed in ``gt``.

    Means run over classes present in the evaluated ground truth. A present
    class that is never predicted gets precision 0.
    """
    cm = confusion_matrix(pred, gt, num_classes, include_void)
    total = cm.sum()
    if total == 0:
        raise EmptyEvaluationError("no ground-truth cells to evaluate")
    L = cm.shape[0]
    tp = np.diag(cm[:, :L]).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    predicted = cm[:, :L].sum(axis=0).astype(np.float64)
    fn = support - tp
    fp = predicted - tp
    present = support > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        recall = np.where(present, tp / support, 0.0)
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        iou = np.where(present, tp / (tp + fp + fn), 0.0)
    return MetricsReport(
        acc=float(tp.sum() / total),
        m_recall=float(recall[present].mean()),
        m_precision=float(precision[present].mean()),
        m_iou=float(iou[present].mean()),
        iou=iou, precision=precision, recall=recall, present=present, confusion=cm,
    )


def label_agreement(pred: SemanticBevMap, gt: SemanticBevMap) -> tuple[float, int]:
    """Fraction of cells observed in both maps whose labels match, and that cell count."""
    both = pred.mask & gt.mask
    n = int(both.sum())
    if n == 0:
        return float("nan"), 0
    return float((pred.labels[both] == gt.labels[both]).mean()), n
