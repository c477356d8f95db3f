"""Central finite-difference check of the attention backward pass."""

from __future__ import annotations

import numpy as np

from .attention import LinearParams, pd_attention, pd_attention_backward


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """max |a - n| / max(|a|, |n|, floor) over entries."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    den = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / den))


def numeric_grad(loss, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central differences of scalar ``loss()`` w.r.t. ``x``, perturbed in place."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = loss()
        flat[i] = old - h
        down = loss()
        flat[i] = old
        out[i] = (up - down) / (2 * h)
    return g


def check_pd_attention(q, s, mask, feat, params: LinearParams, upstream,
                       delta_max=np.pi / 8, h: float = 1e-4) -> dict:
    """Compare analytic gradients with central differences for Q, F and all params.

    The loss is ``sum(upstream * out)``. Returns a JSON-ready report.
    """
    q = np.array(q, dtype=np.float64)
    feat = np.array(feat, dtype=np.float64)
    params = params.copy()
    res = pd_attention(q, s, mask, feat, params, delta_max)
    analytic = pd_attention_backward(res, upstream)

    def loss():
        return float(np.sum(upstream * pd_attention(q, s, mask, feat, params, delta_max).out))

    targets = {"q": q, "f": feat}
    targets.update(params.as_dict())
    report = {"h": h, "groups": {}}
    worst = 0.0
    for name, arr in targets.items():
        num = numeric_grad(loss, arr, h)
        err = relative_error(analytic[name], num)
        worst = max(worst, err)
        report["groups"][name] = {"max_rel_error": err, "size": int(arr.size),
                                  "max_abs_grad": float(np.max(np.abs(num)))}
    report["max_rel_error"] = worst
    return report


def kink_margin(q, s, mask, feat, params: LinearParams, delta_max=np.pi / 8) -> float:
    """Distance of the nearest quantity to a non-differentiable point.

    Covers the ceiling inputs of the index step and the fractional bilinear
    sample coordinates; finite differences are only meaningful when it is
    well above the step size.
    """
    res = pd_attention(q, s, mask, feat, params, delta_max)
    _, H, W = np.shape(feat)
    sp = res.s_prime
    pre = np.concatenate([H * sp[:, 1] / np.pi, (sp[:, 0] / np.pi - 1.0 / W) * W / 2])
    frac_pre = np.abs(pre - np.round(pre))
    cc = res.sda.cache
    frac_s = np.concatenate([np.minimum(cc.wy, 1 - cc.wy).ravel(), np.minimum(cc.wx, 1 - cc.wx).ravel()])
    return float(min(frac_pre.min(), frac_s.min()))


def gradcheck_fixture(seed: int = 8, n: int = 4, c: int = 8, n_ref: int = 4, h: int = 8, w: int = 16):
    """Seeded (Q, S, mask, F, params, upstream) with every query kept."""
    from .attention import random_params

    rng = np.random.default_rng(seed)
    q = rng.normal(0.0, 1.0, (n, c))
    s = np.stack([rng.uniform(0, 2 * np.pi, n), rng.uniform(0.3, np.pi - 0.3, n)], axis=1)
    mask = np.ones(n, dtype=bool)
    feat = rng.normal(0.0, 1.0, (c, h, w))
    params = random_params(c, n_ref, seed + 1, scale=0.4)
    upstream = rng.normal(0.0, 1.0, (n, c))
    return q, s, mask, feat, params, upstream
