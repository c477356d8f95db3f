"""Joint panorama / BEV augmentation: flip, mix and BEV rotation.

A panorama flip mirrors azimuth (phi -> -phi), which in the camera frame is
y -> -y, i.e. a reversal of BEV rows. Under the ceiling pixel layout column
``c`` sits at azimuth ``(c + 1) * 2pi / W``, so the exact azimuth mirror is
``c -> (W - 2 - c) mod W``: the plain image mirror followed by a one-column
seam shift.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InputError, ModeError
from .spherical import TWO_PI
from .types import UNOBSERVED, SemanticBevMap


def pano_flip(img: np.ndarray, seam_aligned: bool = True) -> np.ndarray:
    """Horizontal flip. ``seam_aligned=False`` gives the plain ``W-1-x`` mirror."""
    img = np.asarray(img)
    out = img[:, ::-1]
    if seam_aligned:
        out = np.roll(out, -1, axis=1)
    return np.ascontiguousarray(out)


def _round_like(values: np.ndarray, dtype) -> np.ndarray:
    if np.issubdtype(dtype, np.integer):
        info = np.iinfo(dtype)
        return np.clip(np.floor(values + 0.5), info.min, info.max).astype(dtype)
    return values.astype(dtype)


def pano_mix(i1: np.ndarray, i2: np.ndarray, lam: float) -> np.ndarray:
    """``lam * i1 + (1 - lam) * i2``; integer images round half up."""
    i1, i2 = np.asarray(i1), np.asarray(i2)
    if i1.shape != i2.shape:
        raise InputError(f"cannot mix images of shape {i1.shape} and {i2.shape}")
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"mixing factor {lam} outside [0, 1]")
    if lam == 1.0:
        return i1.copy()
    if lam == 0.0:
        return i2.copy()
    mixed = lam * i1.astype(np.float64) + (1.0 - lam) * i2.astype(np.float64)
    return _round_like(mixed, i1.dtype)


def bev_flip(bev: SemanticBevMap) -> SemanticBevMap:
    """Mirror across the sensor's forward axis (y -> -y): reverse the rows."""
    return SemanticBevMap(bev.labels[::-1].copy(), bev.mask[::-1].copy(), bev.heights[::-1].copy())


def default_center(shape) -> tuple[float, float]:
    """Sensor position in (col, row) cell coordinates."""
    return ((shape[1] - 1) / 2.0, (shape[0] - 1) / 2.0)


def bev_rotate(bev: SemanticBevMap, theta: float, center=None) -> SemanticBevMap:
    """Nearest-neighbour rotation by ``theta`` about ``center`` = (x_c, y_c) in cells.

    Cell coordinates are (x, y) = (col, row). Output cell ``p'`` reads the
    source at ``R(-theta) (p' - c) + c``; sources outside the grid are unobserved.
    """
    ny, nx = bev.shape
    xc, yc = default_center(bev.shape) if center is None else center
    if theta == 0:
        return bev.copy()
    ys, xs = np.mgrid[0:ny, 0:nx].astype(np.float64)
    dx, dy = xs - xc, ys - yc
    c, s = np.cos(theta), np.sin(theta)
    sx = np.floor(c * dx + s * dy + xc + 0.5).astype(np.int64)
    sy = np.floor(-s * dx + c * dy + yc + 0.5).astype(np.int64)
    ok = (sx >= 0) & (sx < nx) & (sy >= 0) & (sy < ny)
    out = SemanticBevMap.empty(bev.shape)
    out.labels[ok] = bev.labels[sy[ok], sx[ok]]
    out.mask[ok] = bev.mask[sy[ok], sx[ok]]
    out.heights[ok] = bev.heights[sy[ok], sx[ok]]
    out.labels[~out.mask] = UNOBSERVED
    out.heights[~out.mask] = 0.0
    return out


def to_one_hot(bev: SemanticBevMap, num_classes: int) -> np.ndarray:
    """``(L, rows, cols)`` float volume; unobserved cells are all-zero."""
    vol = np.zeros((num_classes,) + bev.shape, dtype=np.float64)
    obs = bev.mask & (bev.labels < num_classes)
    r, c = np.nonzero(obs)
    vol[bev.labels[obs].astype(np.int64), r, c] = 1.0
    return vol


def bev_mix(s1, s2, lam: float, mode: str = "mask", seed: int = 0):
    """Mix two BEV targets.

    ``mode="prob"`` blends ``(L, rows, cols)`` probability volumes linearly.
    ``mode="mask"`` picks each cell from ``s1`` with probability ``lam``,
    else from ``s2`` (class ids cannot be averaged).
    """
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"mixing factor {lam} outside [0, 1]")
    if mode == "prob":
        if isinstance(s1, SemanticBevMap) or isinstance(s2, SemanticBevMap):
            raise ModeError("prob mode needs probability volumes; use to_one_hot first")
        a, b = np.asarray(s1), np.asarray(s2)
        if a.ndim != 3 or not np.issubdtype(a.dtype, np.floating):
            raise ModeError("prob mode needs float (L, rows, cols) volumes, not label grids")
        if a.shape != b.shape:
            raise InputError("volumes differ in shape")
        return lam * a + (1.0 - lam) * b
    if mode != "mask":
        raise ModeError(f"unknown bev_mix mode {mode!r}")
    if not isinstance(s1, SemanticBevMap) or not isinstance(s2, SemanticBevMap):
        raise ModeError("mask mode mixes SemanticBevMap objects")
    if s1.shape != s2.shape:
        raise InputError("BEV maps differ in shape")
    pick = np.random.default_rng(seed).random(s1.shape) < lam
    return SemanticBevMap(np.where(pick, s1.labels, s2.labels), np.where(pick, s1.mask, s2.mask),
                          np.where(pick, s1.heights, s2.heights))


# --- joint augmentation -----------------------------------------------------------

@dataclass
class AugmentSpec:
    """Augmentation knobs. ``bev_rotation`` is the magnitude bound of a uniform
    random angle; ``mix_lambda`` of None disables mixing."""

    flip_p: float = 0.5
    mix_lambda: float | None = None
    mix_p: float = 1.0
    bev_rotation: float = 0.0
    rotation_center: tuple[float, float] | None = None
    pair_yaw: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_p <= 1.0 or not 0.0 <= self.mix_p <= 1.0:
            raise InputError("probabilities must lie in [0, 1]")
        if self.mix_lambda is not None and not 0.0 <= self.mix_lambda <= 1.0:
            raise InputError("mix_lambda must lie in [0, 1]")

    @classmethod
    def from_dict(cls, obj: dict) -> "AugmentSpec":
        kw = dict(obj)
        if kw.get("rotation_center") is not None:
            kw["rotation_center"] = tuple(kw["rotation_center"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise InputError(f"bad augmentation spec: {exc}") from None


@dataclass
class Sample:
    pano: np.ndarray
    depth: np.ndarray | None = None
    semantic: np.ndarray | None = None
    gt_bev: SemanticBevMap | None = None


@dataclass
class AugmentRecord:
    flip: bool = False
    mix_lambda: float | None = None
    mix_seed: int | None = None
    bev_rotation: float = 0.0
    yaw_columns: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _decide(spec: AugmentSpec, sample_id: int, has_partner: bool) -> AugmentRecord:
    rng = np.random.default_rng([spec.seed, sample_id])
    rec = AugmentRecord()
    rec.flip = bool(rng.random() < spec.flip_p)
    mix_draw = rng.random()
    mix_seed = int(rng.integers(0, 2**31 - 1))
    if spec.mix_lambda is not None and has_partner and mix_draw < spec.mix_p:
        rec.mix_lambda = float(spec.mix_lambda)
        rec.mix_seed = mix_seed
    angle = rng.uniform(-spec.bev_rotation, spec.bev_rotation) if spec.bev_rotation > 0 else 0.0
    rec.bev_rotation = float(angle)
    return rec


def apply_record(sample: Sample, rec: AugmentRecord, partner: Sample | None = None,
                 rotation_center=None, pair_yaw: bool = False) -> Sample:
    """Apply recorded decisions; replaying a record reproduces the output exactly."""
    pano, depth, sem, bev = sample.pano, sample.depth, sample.semantic, sample.gt_bev
    if rec.flip:
        pano = pano_flip(pano)
        depth = None if depth is None else pano_flip(depth)
        sem = None if sem is None else pano_flip(sem)
        bev = None if bev is None else bev_flip(bev)
    if rec.mix_lambda is not None:
        if partner is None:
            raise InputError("record asks for mixing but no partner sample was given")
        pano = pano_mix(pano, partner.pano, rec.mix_lambda)
        if bev is not None and partner.gt_bev is not None:
            bev = bev_mix(bev, partner.gt_bev, rec.mix_lambda, "mask", rec.mix_seed)
        # depth and semantics stay with the primary sample
    if rec.bev_rotation != 0.0:
        theta = rec.bev_rotation
        if pair_yaw:
            W = pano.shape[1]
            k = int(round(theta * W / TWO_PI))
            theta = k * TWO_PI / W
            rec.yaw_columns = k
            pano = np.roll(pano, k, axis=1)
            depth = None if depth is None else np.roll(depth, k, axis=1)
            sem = None if sem is None else np.roll(sem, k, axis=1)
        if bev is not None:
            bev = bev_rotate(bev, theta, rotation_center)
    return Sample(pano, depth, sem, bev)


def joint_augment(sample: Sample, spec: AugmentSpec, sample_id: int = 0,
                  partner: Sample | None = None) -> tuple[Sample, AugmentRecord]:
    """Draw seeded decisions once and apply them consistently to both views."""
    rec = _decide(spec, sample_id, partner is not None)
    out = apply_record(sample, rec, partner, spec.rotation_center, spec.pair_yaw)
    return out, rec
