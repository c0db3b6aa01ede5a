"""One-slot and cumulative rewards for single-cache, elastic and inelastic content."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .model import REWARD_KINDS, BipartiteTopology, RequestBatch


def _as_dense(batch) -> np.ndarray:
    if isinstance(batch, RequestBatch):
        return batch.dense()
    return np.asarray(batch, dtype=float)


def _check(kind, topology, x, y):
    if kind not in REWARD_KINDS:
        raise ValueError(f"unknown reward kind {kind!r}")
    if kind == "single" and not topology.is_single:
        raise ValueError("single reward requires one user and one cache")
    if x.shape[-2] != topology.n_users or y.shape[-2] != topology.n_caches:
        raise ValueError(f"shape mismatch: x {x.shape}, y {y.shape} for {topology.n_users}x{topology.n_caches}")
    if x.shape[-1] != y.shape[-1]:
        raise ValueError("request and config vectors have different library sizes")
    if kind == "inelastic" and x.size and x.sum(axis=-1).max() > 1:
        raise ValueError("inelastic reward is only defined for one request per user per slot")


def one_slot_reward(kind: str, topology: BipartiteTopology, batch, configs) -> np.ndarray | float:
    """Reward of one slot.

    ``batch`` is a :class:`RequestBatch` or a count array ``(..., I, N)``;
    ``configs`` is ``(..., J, N)``. Leading axes broadcast.
    """
    x = _as_dense(batch)
    y = np.asarray(configs, dtype=float)
    _check(kind, topology, x, y)
    cov = topology.coverage(y)
    if kind == "inelastic":
        cov = np.minimum(cov, 1.0)
    out = (x * cov).sum(axis=(-2, -1))
    return float(out) if np.ndim(out) == 0 else out


def slot_reward_from_ids(kind: str, topology: BipartiteTopology, files: np.ndarray, configs: np.ndarray) -> np.ndarray:
    """Same as :func:`one_slot_reward` but reading requests as file ids.

    ``files`` has shape ``(R, I, r)`` and ``configs`` ``(R, J, N)``; only the
    requested coordinates are touched, which keeps large libraries cheap.
    """
    R, I, r = files.shape
    J = configs.shape[1]
    idx = np.broadcast_to(files.reshape(R, 1, I * r), (R, J, I * r))
    picked = np.take_along_axis(configs, idx, axis=2).reshape(R, J, I, r)
    cov = np.einsum("ij,rjik->rik", topology.adjacency, picked)
    if kind == "inelastic":
        if r != 1:
            raise ValueError("inelastic reward is only defined for one request per user per slot")
        cov = np.minimum(cov, 1.0)
    return cov.sum(axis=(1, 2))


def cumulative_reward(kind: str, topology: BipartiteTopology, batches: Sequence, configs: Sequence) -> float:
    """Sum of one-slot rewards; accumulated with ``math.fsum``."""
    if len(batches) != len(configs):
        raise ValueError(f"{len(batches)} request batches but {len(configs)} configs")
    return math.fsum(one_slot_reward(kind, topology, b, y) for b, y in zip(batches, configs))


def static_reward(kind: str, topology: BipartiteTopology, user_counts: np.ndarray, configs: np.ndarray):
    """Cumulative reward of a fixed config from per-user request counts ``(..., I, N)``.

    With one request per user per slot the inelastic reward is linear in the
    counts, so this equals the slot-by-slot sum.
    """
    counts = np.asarray(user_counts, dtype=float)
    cov = topology.coverage(np.asarray(configs, dtype=float))
    if kind == "inelastic":
        cov = np.minimum(cov, 1.0)
    out = (counts * cov).sum(axis=(-2, -1))
    return float(out) if np.ndim(out) == 0 else out


class KahanSum:
    """Elementwise compensated running sum over an array of accumulators."""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self._comp = np.zeros(shape)

    def add(self, values) -> None:
        y = values - self._comp
        t = self.total + y
        self._comp = (t - self.total) - y
        self.total = t
