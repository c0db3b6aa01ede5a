"""Projection onto the capped simplex and reward supergradients."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import FEAS_TOL, BipartiteTopology

BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200


@dataclass
class ProjectionResult:
    projected: np.ndarray
    multiplier: float
    iterations: int


def _capped_sum(v, tau):
    return np.clip(v - tau, 0.0, 1.0).sum(axis=-1)


def _shift_by_breakpoints(v: np.ndarray, capacity: float) -> np.ndarray:
    """Exact shift ``tau`` per row of ``v`` (shape ``(B, n)``, ``n > capacity``).

    The capped sum ``sum(clip(v - tau, 0, 1))`` is piecewise linear and
    nonincreasing in tau, with kinks at ``v_f - 1`` (slope drops by one) and
    ``v_f`` (slope rises by one).
    """
    B, n = v.shape
    points = np.concatenate((v - 1.0, v), axis=1)
    order = points.argsort(axis=1, kind="stable")
    rows = np.arange(B)
    points = points[rows[:, None], order]
    slopes = np.where(order < n, -1.0, 1.0).cumsum(axis=1)
    values = np.empty((B, 2 * n))
    values[:, 0] = n  # every coordinate sits at one left of the first kink
    np.cumsum(slopes[:, :-1] * np.diff(points, axis=1), axis=1, out=values[:, 1:])
    values[:, 1:] += n
    # last kink whose value is still >= capacity; the following segment crosses it
    k = np.minimum((values >= capacity).sum(axis=1) - 1, 2 * n - 2)
    base, val, slope = points[rows, k], values[rows, k], slopes[rows, k]
    return np.where(slope < 0, base + (val - capacity) / np.where(slope < 0, -slope, 1.0), base)


def _shift_wide_row(v: np.ndarray, capacity: float) -> float:
    """Same as :func:`_shift_by_breakpoints` for one long row, without the merged argsort."""
    n = v.size
    s = np.sort(v)
    prefix = np.concatenate(([0.0], np.cumsum(s)))
    cand = np.concatenate((s - 1.0, s))
    below = np.searchsorted(s, cand, side="right")
    under_cap = np.searchsorted(s, cand + 1.0, side="left")
    value = (n - under_cap) + (prefix[under_cap] - prefix[below]) - cand * (under_cap - below)
    hi_side = value >= capacity
    lo_i = np.flatnonzero(hi_side)[np.argmax(cand[hi_side])]
    hi_i = np.flatnonzero(~hi_side)[np.argmin(cand[~hi_side])] if (~hi_side).any() else lo_i
    t0, t1, v0, v1 = cand[lo_i], cand[hi_i], value[lo_i], value[hi_i]
    if v0 == v1 or t0 == t1:
        return float(t0)
    return float(t0 + (v0 - capacity) * (t1 - t0) / (v0 - v1))


WIDE_ROW = 64
NEWTON_MAX_ITER = 60


def _shift_newton(v: np.ndarray, capacity: float) -> tuple[np.ndarray, np.ndarray]:
    """Safeguarded Newton on the capped-sum residual for rows ``v`` of shape ``(B, n)``.

    The residual is piecewise linear, so Newton from a bracketing point lands
    exactly once it reaches the right piece. Returns the shifts and a mask of
    rows that converged.
    """
    B = v.shape[0]
    lo = np.zeros(B)
    hi = v.max(axis=1)
    tau = lo.copy()
    done = np.zeros(B, dtype=bool)
    tol = 1e-12 * max(1.0, capacity)
    for _ in range(NEWTON_MAX_ITER):
        shifted = v - tau[:, None]
        resid = np.minimum(np.maximum(shifted, 0.0), 1.0).sum(axis=1) - capacity
        active = ((shifted > 0.0) & (shifted < 1.0)).sum(axis=1)
        done = np.abs(resid) <= tol
        if done.all():
            break
        lo = np.where(resid > 0, tau, lo)
        hi = np.where(resid < 0, tau, hi)
        step = tau + resid / np.maximum(active, 1)
        ok = (active > 0) & (step > lo) & (step < hi)
        tau = np.where(done, tau, np.where(ok, step, 0.5 * (lo + hi)))
    return tau, done


def _polish(v, tau, capacity):
    # one Newton step on the active set absorbs round-off from the scan
    shifted = v - tau[:, None]
    active = ((shifted > 0.0) & (shifted < 1.0)).sum(axis=1)
    resid = np.minimum(np.maximum(shifted, 0.0), 1.0).sum(axis=1) - capacity
    return np.where(active > 0, tau + resid / np.maximum(active, 1), tau)


def project_capped_simplex_batch(v: np.ndarray, capacity: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise Euclidean projection onto ``{y in [0,1]^N : sum y <= capacity}``.

    Returns the projected array and the per-row shift (zero for rows whose
    clipped version is already feasible).
    """
    v = np.asarray(v, dtype=float)
    if not np.isfinite(v).all():
        raise ValueError("projection input must be finite")
    out = np.minimum(np.maximum(v, 0.0), 1.0)
    tau = np.zeros(v.shape[:-1])
    over = out.sum(axis=-1) > capacity + FEAS_TOL
    if over.any():
        rows = v[over]
        if rows.shape[1] >= WIDE_ROW:
            t, ok = _shift_newton(rows, capacity)
            for k in np.flatnonzero(~ok):
                t[k] = _shift_wide_row(rows[k], capacity)
        else:
            t = _shift_by_breakpoints(rows, capacity)
        t = np.maximum(_polish(rows, t, capacity), 0.0)
        out[over] = np.minimum(np.maximum(rows - t[:, None], 0.0), 1.0)
        tau[over] = t
    return out, tau


def project_capped_simplex(v, capacity: float, method: str = "sort") -> ProjectionResult:
    """Project one vector onto the capped simplex of the given capacity.

    ``method="bisect"`` searches the shift by bisection on the capacity
    residual and falls back to the breakpoint scan if it fails to converge.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("projection input must be finite")
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    clipped = np.clip(v, 0.0, 1.0)
    if clipped.sum() <= capacity + FEAS_TOL:
        return ProjectionResult(clipped, 0.0, 0)
    if method == "sort":
        y, tau = project_capped_simplex_batch(v[None], capacity)
        return ProjectionResult(y[0], float(tau[0]), 1)
    if method != "bisect":
        raise ValueError(f"unknown projection method {method!r}")
    lo, hi = 0.0, float(v.max())
    for it in range(1, BISECT_MAX_ITER + 1):
        mid = 0.5 * (lo + hi)
        resid = _capped_sum(v, mid) - capacity
        if abs(resid) <= BISECT_TOL:
            y = np.clip(v - mid, 0.0, 1.0)
            if y.sum() <= capacity + FEAS_TOL:
                return ProjectionResult(y, mid, it)
        if resid > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= np.finfo(float).eps * max(1.0, hi):
            break
    res = project_capped_simplex(v, capacity, method="sort")
    res.iterations = it + res.iterations
    return res


def supergradient(kind: str, topology: BipartiteTopology, x, y, mode: str = "masked") -> np.ndarray:
    """Supergradient of the one-slot reward w.r.t. every cache's occupancy.

    ``x`` has shape ``(..., I, N)`` (request counts), ``y`` has shape
    ``(..., J, N)``; the result matches ``y``. For inelastic rewards the
    default ``masked`` mode zeroes requests whose coverage already reaches one;
    ``mode="paper"`` returns the unmasked linear gradient instead.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_dims(topology, x, y)
    if kind == "single" and not topology.is_single:
        raise ValueError("single reward requires one user and one cache")
    if kind in ("single", "elastic") or (kind == "inelastic" and mode == "paper"):
        return topology.aggregate(x)
    if kind != "inelastic":
        raise ValueError(f"unknown reward kind {kind!r}")
    if mode != "masked":
        raise ValueError(f"unknown supergradient mode {mode!r}")
    open_ = topology.coverage(y) < 1.0
    return topology.aggregate(x * open_)


def _check_dims(topology, x, y):
    if x.shape[-2] != topology.n_users or y.shape[-2] != topology.n_caches:
        raise ValueError(
            f"expected x (..., {topology.n_users}, N) and y (..., {topology.n_caches}, N), "
            f"got {x.shape} and {y.shape}"
        )
    if x.shape[-1] != y.shape[-1]:
        raise ValueError("request and config vectors have different library sizes")


def gradient_norm_bound(topology: BipartiteTopology, r: int = 1) -> float:
    """Worst-case 2-norm of a one-slot supergradient, ``d * sqrt(r * J)``."""
    d = topology.degree
    return d * math.sqrt(r * topology.n_caches)


def diameter_bound(n_caches: int, capacity: float) -> float:
    """Upper bound ``sqrt(2 C J)`` on the Euclidean diameter of the feasible set."""
    return math.sqrt(2.0 * capacity * n_caches)
