"""Best static configuration in hindsight for each reward kind."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import diameter_bound, project_capped_simplex_batch, supergradient
from .model import BipartiteTopology, RequestSequence, top_c_mask
from .rewards import static_reward

BRUTE_MAX_FILES = 6
BRUTE_MAX_CAPACITY = 2
BRUTE_MAX_CACHES = 2


@dataclass
class HindsightSolution:
    configs: np.ndarray
    reward: float
    method: str
    certified_exact: bool
    uncoded_reward: float | None = None
    history: np.ndarray | None = field(default=None, repr=False)


def static_opt_single(cum_counts, capacity: int) -> HindsightSolution:
    counts = np.asarray(cum_counts, dtype=float)
    if counts.ndim != 1:
        raise ValueError("expected a count vector")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    mask = top_c_mask(counts, capacity)
    return HindsightSolution(mask[None].astype(float), float(counts[mask].sum()), "topk", True)


def elastic_hindsight_reward(topology: BipartiteTopology, user_counts: np.ndarray, capacity: int) -> np.ndarray:
    """Vectorized optimum value for count arrays of shape ``(..., I, N)``."""
    agg = topology.aggregate(np.asarray(user_counts, dtype=float))
    return (agg * top_c_mask(agg, capacity)).sum(axis=(-2, -1))


def static_opt_elastic(topology: BipartiteTopology, user_counts, capacity: int) -> HindsightSolution:
    """Each cache stores the top-C files of its in-neighbours' aggregated counts."""
    counts = _user_counts(topology, user_counts)
    agg = topology.aggregate(counts)
    y = top_c_mask(agg, capacity).astype(float)
    return HindsightSolution(y, float((agg * y).sum()), "topk", True)


def orthogonal_config(topology: BipartiteTopology, user_counts, capacity: int, order=None) -> np.ndarray:
    """Uncoded configs with pairwise-disjoint supports, built cache by cache.

    Each cache in turn takes the top-C files of its aggregated counts among
    files no earlier cache holds. On such configs the inelastic and elastic
    rewards coincide.
    """
    counts = _user_counts(topology, user_counts)
    agg = topology.aggregate(counts)
    J, N = agg.shape
    y = np.zeros((J, N))
    free = np.ones(N, dtype=bool)
    for j in range(J) if order is None else order:
        m = top_c_mask(agg[j], capacity, eligible=free)
        y[j] = m
        free &= ~m
    return y


def _user_counts(topology, data) -> np.ndarray:
    if isinstance(data, RequestSequence):
        return data.counts()
    counts = np.asarray(data, dtype=float)
    if counts.ndim == 1 and topology.n_users == 1:
        counts = counts[None]
    if counts.ndim != 2 or counts.shape[0] != topology.n_users:
        raise ValueError(f"expected per-user counts of shape ({topology.n_users}, N), got {counts.shape}")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    return counts


def _best_block(counts_u: np.ndarray, others_u: np.ndarray, capacity: int) -> np.ndarray:
    """Exact maximizer over one cache's capped simplex with the other caches fixed.

    ``counts_u``/``others_u`` are ``(d, N)``: the in-neighbours' counts and the
    coverage they already get elsewhere. The objective is separable and
    concave per file, so greedy filling of the steepest segments is optimal.
    """
    d, N = counts_u.shape
    ends = np.clip(1.0 - others_u, 0.0, 1.0)
    order = np.argsort(ends, axis=0, kind="stable")
    ends = np.take_along_axis(ends, order, axis=0)
    n = np.take_along_axis(counts_u, order, axis=0)
    starts = np.vstack([np.zeros((1, N)), ends[:-1]])
    slopes = np.cumsum(n[::-1], axis=0)[::-1]
    lengths = ends - starts
    keep = (lengths > 0) & (slopes > 0)
    seg_k, seg_f = np.nonzero(keep)
    if seg_f.size == 0:
        return np.zeros(N)
    s, ln = slopes[seg_k, seg_f], lengths[seg_k, seg_f]
    rank = np.lexsort((seg_k, seg_f, -s))
    ln, seg_f = ln[rank], seg_f[rank]
    before = np.cumsum(ln) - ln
    take = np.clip(capacity - before, 0.0, ln)
    z = np.zeros(N)
    np.add.at(z, seg_f, take)
    return np.minimum(z, 1.0)


def _coordinate_polish(topology, counts, y, capacity, max_sweeps=50):
    value = static_reward("inelastic", topology, counts, y)
    for _ in range(max_sweeps):
        start = value
        for j in range(topology.n_caches):
            users = list(topology.in_neighbors[j])
            if not users:
                continue
            cov = topology.coverage(y)
            others = cov[users] - y[j][None]
            cand = y.copy()
            cand[j] = _best_block(counts[users], others, capacity)
            v = static_reward("inelastic", topology, counts, cand)
            if v > value:
                y, value = cand, v
        if value <= start + 1e-12:
            break
    return y, value


def _inelastic_value(A, counts, y):
    return float((counts * np.minimum(A @ y, 1.0)).sum())


def _ascent(topology, counts, y0, capacity, budget):
    A = np.asarray(topology.adjacency)
    L = float(np.linalg.norm(A.T @ counts))
    D = diameter_bound(topology.n_caches, capacity)
    y = y0
    best_y, best_v = y0, _inelastic_value(A, counts, y0)
    history = np.full(budget, best_v)
    if L == 0:
        return best_y, best_v, history
    for k in range(1, budget + 1):
        cov = A @ y
        g = A.T @ (counts * (cov < 1.0))
        y, _ = project_capped_simplex_batch(y + (D / (L * math.sqrt(k))) * g, capacity)
        v = _inelastic_value(A, counts, y)
        if v > best_v:
            best_y, best_v = y, v
        history[k - 1] = best_v
    return best_y, best_v, history


def static_opt_inelastic(topology: BipartiteTopology, data, capacity: int, budget: int = 2000,
                         mode: str = "ascent", warm_start: np.ndarray | None = None) -> HindsightSolution:
    """Maximize the cumulative inelastic reward over the fractional feasible set.

    ``data`` is a :class:`RequestSequence` (one request per user per slot) or
    per-user counts ``(I, N)``. The solver starts from the best of the
    elastic top-C configs, the disjoint-support configs and ``warm_start``,
    polishes it with exact per-cache block maximization, runs ``budget``
    projected supergradient steps with step ``D / (L sqrt(k))`` keeping the
    best iterate, and polishes that again. The result is a lower bound on the
    optimum (``certified_exact=False``).

    ``mode="brute_force"`` also enumerates every uncoded configuration (tiny
    instances only); ``certified_exact`` then records whether the ascent
    matched the best uncoded value, and the better of the two is returned.
    """
    if isinstance(data, RequestSequence) and data.r != 1:
        raise ValueError("inelastic hindsight requires one request per user per slot")
    if mode not in ("ascent", "brute_force"):
        raise ValueError(f"unknown mode {mode!r}")
    counts = _user_counts(topology, data)
    if mode == "brute_force":
        _brute_force_limits(topology, counts, capacity)
    starts = [
        static_opt_elastic(topology, counts, capacity).configs,
        orthogonal_config(topology, counts, capacity),
        orthogonal_config(topology, counts, capacity, order=range(topology.n_caches - 1, -1, -1)),
    ]
    if warm_start is not None:
        starts.append(np.asarray(warm_start, dtype=float))
    values = [static_reward("inelastic", topology, counts, y) for y in starts]
    y0 = starts[int(np.argmax(values))]
    y0, _ = _coordinate_polish(topology, counts, y0, capacity)
    y, v, history = _ascent(topology, counts, y0, capacity, budget)
    # subgradient iterates hover near a vertex; snap to it and re-polish
    finals = [_coordinate_polish(topology, counts, y, capacity),
              _coordinate_polish(topology, counts, top_c_mask(y, capacity).astype(float), capacity)]
    y, v = max(finals, key=lambda yv: yv[1])
    if budget:
        history[-1] = max(history[-1], v)
    sol = HindsightSolution(y, float(v), "supergradient_ascent", False, history=history)
    if mode == "brute_force":
        yb, vb = brute_force_uncoded(topology, counts, capacity)
        sol.uncoded_reward = vb
        sol.certified_exact = sol.reward >= vb - 1e-6
        sol.method = "brute_force"
        if vb > sol.reward:
            sol.configs, sol.reward = yb, vb
    return sol


def _brute_force_limits(topology, counts, capacity):
    N = counts.shape[1]
    if N > BRUTE_MAX_FILES or capacity > BRUTE_MAX_CAPACITY or topology.n_caches > BRUTE_MAX_CACHES:
        raise ValueError(
            f"brute force limited to N<={BRUTE_MAX_FILES}, C<={BRUTE_MAX_CAPACITY}, J<={BRUTE_MAX_CACHES}"
        )


def brute_force_uncoded(topology: BipartiteTopology, data, capacity: int, kind: str = "inelastic"):
    """Best uncoded configuration by enumeration; returns ``(configs, reward)``."""
    counts = _user_counts(topology, data)
    _brute_force_limits(topology, counts, capacity)
    J, N = topology.n_caches, counts.shape[1]
    subsets = list(itertools.combinations(range(N), min(capacity, N)))
    best_v, best_y = -np.inf, None
    for combo in itertools.product(subsets, repeat=J):
        y = np.zeros((J, N))
        for j, s in enumerate(combo):
            y[j, list(s)] = 1.0
        v = static_reward(kind, topology, counts, y)
        if v > best_v:
            best_v, best_y = v, y
    return best_y, float(best_v)


def hindsight(kind: str, topology: BipartiteTopology, user_counts, capacity: int, **kw) -> HindsightSolution:
    """Dispatch on reward kind."""
    if kind == "single":
        if not topology.is_single:
            raise ValueError("single reward requires one user and one cache")
        counts = _user_counts(topology, user_counts)
        return static_opt_single(counts[0], capacity)
    if kind == "elastic":
        return static_opt_elastic(topology, user_counts, capacity)
    if kind == "inelastic":
        return static_opt_inelastic(topology, user_counts, capacity, **kw)
    raise ValueError(f"unknown reward kind {kind!r}")


__all__ = [
    "HindsightSolution", "static_opt_single", "static_opt_elastic", "static_opt_inelastic",
    "orthogonal_config", "brute_force_uncoded", "elastic_hindsight_reward", "hindsight",
]
