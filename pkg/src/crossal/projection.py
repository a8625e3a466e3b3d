"""Euclidean projection onto the probability simplex intersected with a box."""
from __future__ import annotations

import numpy as np


def project_capped_simplex(v, lo, hi, n_iter: int = 200) -> np.ndarray:
    """argmin ||x - v||_2 subject to sum(x) = 1 and lo <= x <= hi.

    KKT gives x = clip(v - tau, lo, hi) for a scalar tau; sum(x) is
    nonincreasing in tau, so tau is found by bisection and then polished with
    the closed form on the free coordinates. Requires sum(lo) <= 1 <= sum(hi).
    """
    v = np.asarray(v, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), v.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), v.shape)
    if lo.sum() > 1 + 1e-12 or hi.sum() < 1 - 1e-12 or np.any(lo > hi):
        raise ValueError("box does not intersect the simplex")

    def total(tau):
        return np.clip(v - tau, lo, hi).sum()

    a, b = np.min(v - hi), np.max(v - lo)  # total(a) >= 1 >= total(b)
    for _ in range(n_iter):
        mid = 0.5 * (a + b)
        if total(mid) > 1.0:
            a = mid
        else:
            b = mid
        if b - a <= 1e-15 * max(1.0, abs(a)):
            break
    tau = 0.5 * (a + b)
    x = np.clip(v - tau, lo, hi)
    free = (v - tau > lo) & (v - tau < hi)
    if free.any():
        tau_exact = (v[free].sum() - (1.0 - x[~free].sum())) / free.sum()
        y = np.clip(v - tau_exact, lo, hi)
        if abs(y.sum() - 1.0) <= abs(x.sum() - 1.0):
            x = y
    return x


def project_box_simplex(v, center, epsilon: float) -> np.ndarray:
    """Project ``v`` onto action distributions within sup-distance ``epsilon`` of ``center``."""
    center = np.asarray(center, dtype=float)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    lo = np.maximum(0.0, center - epsilon)
    hi = np.minimum(1.0, center + epsilon)
    return project_capped_simplex(v, lo, hi)
