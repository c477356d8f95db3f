"""Panoramic distortion-aware attention: spherical offsets, index generation and
spatial deformable sampling, with an analytic backward pass.

Shapes: queries ``Q`` are ``(N, C)``, spherical references ``S`` are ``(N, 2)``
with columns ``(phi, theta)``, the feature map ``F`` is ``(C, H, W)``.
Linear layers follow ``y = x @ W.T + b``.

The integer base index is treated as a constant in the backward pass; gradient
reaches the parameters through the fractional 2-D sampling offsets and the
attention-weight head only, so ``ds_*`` and ``pos_*`` get exactly zero. A
straight-through variant would instead pass the ceiling's slope (``H / pi``
rows and ``W / 2pi`` columns per radian) back to the angular offsets.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import InputError
from .spherical import TWO_PI, sph_to_pixel

DEFAULT_N_REF = 4
DEFAULT_DELTA_MAX = np.pi / 8


@dataclass
class LinearParams:
    pos_w: np.ndarray  # (C, 2)        spherical position encoding
    pos_b: np.ndarray  # (C,)
    ds_w: np.ndarray   # (2, C)        spherical angular offsets
    ds_b: np.ndarray   # (2,)
    ref_w: np.ndarray  # (2*N_ref, C)  2-D sampling offsets, (drow, dcol) pairs
    ref_b: np.ndarray  # (2*N_ref,)
    att_w: np.ndarray  # (N_ref, C)    attention-weight logits
    att_b: np.ndarray  # (N_ref,)

    @property
    def channels(self) -> int:
        return self.pos_w.shape[0]

    @property
    def n_ref(self) -> int:
        return self.att_w.shape[0]

    def names(self) -> list[str]:
        return [f.name for f in fields(self)]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in self.names()}

    def copy(self) -> "LinearParams":
        return LinearParams(**{n: v.copy() for n, v in self.as_dict().items()})

    def validate(self) -> None:
        C, R = self.channels, self.n_ref
        want = {"pos_w": (C, 2), "pos_b": (C,), "ds_w": (2, C), "ds_b": (2,),
                "ref_w": (2 * R, C), "ref_b": (2 * R,), "att_w": (R, C), "att_b": (R,)}
        for n, shape in want.items():
            v = getattr(self, n)
            if v.shape != shape:
                raise InputError(f"param {n} has shape {v.shape}, expected {shape}")
            if not np.all(np.isfinite(v)):
                raise InputError(f"param {n} has non-finite entries")


def init_params(C: int, n_ref: int = DEFAULT_N_REF, seed: int = 0) -> LinearParams:
    """Position encoding drawn U(-1/sqrt(2), 1/sqrt(2)); offset and weight heads zero."""
    if C < 1 or n_ref < 1:
        raise InputError("C and N_ref must be >= 1")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(2.0)
    return LinearParams(
        pos_w=rng.uniform(-bound, bound, (C, 2)), pos_b=rng.uniform(-bound, bound, C),
        ds_w=np.zeros((2, C)), ds_b=np.zeros(2),
        ref_w=np.zeros((2 * n_ref, C)), ref_b=np.zeros(2 * n_ref),
        att_w=np.zeros((n_ref, C)), att_b=np.zeros(n_ref),
    )


def random_params(C: int, n_ref: int, seed: int, scale: float = 0.5) -> LinearParams:
    """Dense Gaussian parameters for fixtures and gradient checks."""
    rng = np.random.default_rng(seed)
    g = lambda *shape: rng.normal(0.0, scale, shape)  # noqa: E731
    return LinearParams(g(C, 2), g(C), g(2, C), g(2), g(2 * n_ref, C), g(2 * n_ref),
                        g(n_ref, C), g(n_ref))


# --- spherical geometry-aware constraints -------------------------------------------

def sgc_offsets(q, s, mask, params: LinearParams, delta_max: float | None = DEFAULT_DELTA_MAX):
    """Angular offsets ``(dphi, dtheta)`` for the rows kept by ``mask``; shape (M, 2)."""
    q = np.asarray(q, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if q.ndim != 2 or s.shape != (len(q), 2) or mask.shape != (len(q),):
        raise InputError(f"shape mismatch: Q {q.shape}, S {s.shape}, mask {mask.shape}")
    if q.shape[1] != params.channels:
        raise InputError(f"queries have {q.shape[1]} channels, params expect {params.channels}")
    qm, sm = q[mask], s[mask]
    hidden = qm + sm @ params.pos_w.T + params.pos_b
    raw = hidden @ params.ds_w.T + params.ds_b
    if delta_max is None:
        return raw
    return delta_max * np.tanh(raw / delta_max)


def apply_offsets(s, delta):
    """``phi' = phi + dphi`` wrapped to [0, 2pi); ``theta' = theta + dtheta`` clamped to [0, pi]."""
    s = np.asarray(s, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if s.shape != delta.shape:
        raise InputError(f"offsets {delta.shape} do not match references {s.shape}")
    phi = np.mod(s[:, 0] + delta[:, 0], TWO_PI)
    phi = np.where(phi >= TWO_PI, 0.0, phi)
    theta = np.clip(s[:, 1] + delta[:, 1], 0.0, np.pi)
    return np.stack([phi, theta], axis=1)


def sgc_index(s_prime, H: int, W: int) -> np.ndarray:
    """Integer ``(row, col)`` feature-map index per spherical location; shape (M, 2)."""
    s_prime = np.asarray(s_prime, dtype=np.float64).reshape(-1, 2)
    row, col = sph_to_pixel(s_prime[:, 0], s_prime[:, 1], H, W)
    return np.stack([row, col], axis=1).astype(np.int64)


# --- spatial deformable attention -------------------------------------------------------

def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class SdaCache:
    q: np.ndarray
    feat_shape: tuple
    r0: np.ndarray
    r1: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    wy: np.ndarray
    wx: np.ndarray
    v00: np.ndarray
    v01: np.ndarray
    v10: np.ndarray
    v11: np.ndarray
    samples: np.ndarray
    params: LinearParams


@dataclass
class SdaResult:
    out: np.ndarray       # (M, C)
    weights: np.ndarray   # (M, N_ref), rows sum to 1
    cache: SdaCache


def sda_forward(q, idx, feat, params: LinearParams) -> SdaResult:
    """Weighted sum of bilinear feature samples at ``idx + f_ref(q)``.

    Columns wrap around the azimuth seam; rows clamp at the poles.
    """
    q = np.asarray(q, dtype=np.float64)
    idx = np.asarray(idx)
    feat = np.asarray(feat, dtype=np.float64)
    if feat.ndim != 3:
        raise InputError(f"feature map must be (C, H, W), got {feat.shape}")
    C, H, W = feat.shape
    if q.ndim != 2 or q.shape[1] != C or idx.shape != (len(q), 2):
        raise InputError(f"shape mismatch: Q {q.shape}, idx {idx.shape}, F {feat.shape}")
    if params.channels != C:
        raise InputError(f"params expect {params.channels} channels, feature map has {C}")
    R = params.n_ref
    off = (q @ params.ref_w.T + params.ref_b).reshape(len(q), R, 2)
    y = idx[:, None, 0] + off[..., 0]
    x = idx[:, None, 1] + off[..., 1]
    r0f = np.floor(y)
    c0f = np.floor(x)
    wy = y - r0f
    wx = x - c0f
    r0 = np.clip(r0f, 0, H - 1).astype(np.int64)
    r1 = np.clip(r0f + 1, 0, H - 1).astype(np.int64)
    c0 = np.mod(c0f, W).astype(np.int64)
    c1 = np.mod(c0f + 1, W).astype(np.int64)
    fT = np.moveaxis(feat, 0, -1)  # (H, W, C)
    v00, v01, v10, v11 = fT[r0, c0], fT[r0, c1], fT[r1, c0], fT[r1, c1]
    a, b = wy[..., None], wx[..., None]
    samples = (1 - a) * ((1 - b) * v00 + b * v01) + a * ((1 - b) * v10 + b * v11)
    weights = softmax(q @ params.att_w.T + params.att_b)
    out = np.einsum("mr,mrc->mc", weights, samples)
    cache = SdaCache(q, feat.shape, r0, r1, c0, c1, wy, wx, v00, v01, v10, v11, samples, params)
    return SdaResult(out, weights, cache)


def sda_backward(res: SdaResult, upstream) -> dict[str, np.ndarray]:
    """Gradients of ``sum(upstream * out)`` w.r.t. Q, F and every parameter group."""
    cc = res.cache
    p = cc.params
    G = np.asarray(upstream, dtype=np.float64)
    if G.shape != res.out.shape:
        raise InputError(f"upstream gradient {G.shape} does not match output {res.out.shape}")
    A = res.weights
    M, R = A.shape
    C, H, W = cc.feat_shape

    dA = np.einsum("mc,mrc->mr", G, cc.samples)
    dlogits = A * (dA - (A * dA).sum(axis=1, keepdims=True))

    dS = A[..., None] * G[:, None, :]  # (M, R, C)
    a, b = cc.wy[..., None], cc.wx[..., None]
    dy = ((1 - b) * (cc.v10 - cc.v00) + b * (cc.v11 - cc.v01))
    dx = ((1 - a) * (cc.v01 - cc.v00) + a * (cc.v11 - cc.v10))
    doff = np.stack([(dS * dy).sum(-1), (dS * dx).sum(-1)], axis=-1).reshape(M, 2 * R)

    grads = {n: np.zeros_like(v) for n, v in p.as_dict().items()}
    grads["att_w"] = dlogits.T @ cc.q
    grads["att_b"] = dlogits.sum(axis=0)
    grads["ref_w"] = doff.T @ cc.q
    grads["ref_b"] = doff.sum(axis=0)
    grads["q"] = dlogits @ p.att_w + doff @ p.ref_w

    dF = np.zeros((H * W, C))
    for rr, cidx, w in ((cc.r0, cc.c0, (1 - a) * (1 - b)), (cc.r0, cc.c1, (1 - a) * b),
                        (cc.r1, cc.c0, a * (1 - b)), (cc.r1, cc.c1, a * b)):
        np.add.at(dF, (rr * W + cidx).ravel(), (w * dS).reshape(-1, C))
    grads["f"] = np.moveaxis(dF.reshape(H, W, C), -1, 0)
    return grads


def sda_multilevel(q, idx_levels, feats, params_levels) -> np.ndarray:
    """Sum of per-level SDA outputs, one (idx, F, params) triple per level."""
    if not (len(idx_levels) == len(feats) == len(params_levels)) or not feats:
        raise InputError("need matching, non-empty per-level inputs")
    return sum(sda_forward(q, i, f, p).out for i, f, p in zip(idx_levels, feats, params_levels))


# --- full composition -----------------------------------------------------------------------

@dataclass
class PdResult:
    out: np.ndarray
    weights: np.ndarray
    rows: np.ndarray       # indices of the kept queries
    s_prime: np.ndarray
    idx: np.ndarray
    sda: SdaResult
    n_queries: int


def pd_attention(q, s, mask, feat, params: LinearParams,
                 delta_max: float | None = DEFAULT_DELTA_MAX) -> PdResult:
    """Offsets -> spherical locations -> indices -> SDA for the masked-in queries."""
    params.validate()
    q = np.asarray(q, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    feat = np.asarray(feat, dtype=np.float64)
    _, H, W = feat.shape
    delta = sgc_offsets(q, s, mask, params, delta_max)
    s_prime = apply_offsets(np.asarray(s, dtype=np.float64)[mask], delta)
    idx = sgc_index(s_prime, H, W)
    sda = sda_forward(q[mask], idx, feat, params)
    return PdResult(sda.out, sda.weights, np.nonzero(mask)[0], s_prime, idx, sda, len(q))


def pd_attention_backward(res: PdResult, upstream) -> dict[str, np.ndarray]:
    """Like :func:`sda_backward`, with the Q gradient scattered back to all N rows."""
    g = sda_backward(res.sda, upstream)
    dq = np.zeros((res.n_queries, g["q"].shape[1]))
    dq[res.rows] = g["q"]
    g["q"] = dq
    return g
