"""Domain types: catalog, bipartite topology, request batches, cache configs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

FEAS_TOL = 1e-9

REWARD_KINDS = ("single", "elastic", "inelastic")


@dataclass(frozen=True)
class Catalog:
    n_files: int

    def __post_init__(self):
        if int(self.n_files) < 1:
            raise ValueError(f"n_files must be >= 1, got {self.n_files}")

    def check_ids(self, ids) -> None:
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= self.n_files):
            raise ValueError(f"file id out of range for catalog of size {self.n_files}")


@dataclass
class CacheConfig:
    """Fractional occupancy of one cache; entries are the cached fraction of each file."""

    occupancy: np.ndarray
    capacity: int
    uncoded: bool = False

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=float)
        self.validate()

    def validate(self, tol: float = FEAS_TOL) -> None:
        y = self.occupancy
        if y.ndim != 1:
            raise ValueError("occupancy must be a vector")
        check_feasible(y, self.capacity, tol=tol)
        if self.uncoded:
            if not np.all((y == 0.0) | (y == 1.0)):
                raise ValueError("uncoded config must have 0/1 entries")

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.occupancy)

    @classmethod
    def from_files(cls, files: Iterable[int], n_files: int, capacity: int) -> "CacheConfig":
        y = np.zeros(n_files)
        y[list(files)] = 1.0
        return cls(y, capacity, uncoded=True)


def check_feasible(y, capacity: float, tol: float = FEAS_TOL) -> None:
    """Raise if any cache row of ``y`` (shape ``(..., N)``) leaves the capped simplex."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("occupancy contains non-finite entries")
    if y.size and (y.min() < -tol or y.max() > 1.0 + tol):
        raise ValueError("occupancy outside [0, 1]")
    if y.size and y.sum(axis=-1).max() > capacity + tol:
        raise ValueError(f"occupancy exceeds capacity {capacity}")


def is_feasible(y, capacity: float, tol: float = FEAS_TOL) -> bool:
    try:
        check_feasible(y, capacity, tol)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class BipartiteTopology:
    """Users on the left, caches on the right; ``edges`` holds 0-indexed (user, cache) pairs."""

    n_users: int
    n_caches: int
    edges: tuple
    out_neighbors: tuple = field(init=False, repr=False)
    in_neighbors: tuple = field(init=False, repr=False)
    adjacency: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_users < 1 or self.n_caches < 1:
            raise ValueError("topology needs at least one user and one cache")
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < self.n_users and 0 <= j < self.n_caches):
                raise ValueError(f"edge {(i, j)} out of range")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge {(i, j)}")
            seen.add((i, j))
        out = tuple(tuple(sorted(j for (u, j) in self.edges if u == i)) for i in range(self.n_users))
        inn = tuple(tuple(sorted(i for (i, c) in self.edges if c == j)) for j in range(self.n_caches))
        A = np.zeros((self.n_users, self.n_caches))
        for i, j in self.edges:
            A[i, j] = 1.0
        A.setflags(write=False)
        object.__setattr__(self, "out_neighbors", out)
        object.__setattr__(self, "in_neighbors", inn)
        object.__setattr__(self, "adjacency", A)

    @property
    def in_degrees(self) -> np.ndarray:
        return np.array([len(n) for n in self.in_neighbors])

    @property
    def out_degrees(self) -> np.ndarray:
        return np.array([len(n) for n in self.out_neighbors])

    @property
    def right_regular(self) -> bool:
        return len(set(self.in_degrees.tolist())) == 1

    @property
    def degree(self) -> int:
        """Common in-degree ``d``; raises if the caches have different in-degrees."""
        if not self.right_regular:
            raise ValueError(f"topology is not right-regular: in-degrees {self.in_degrees.tolist()}")
        return int(self.in_degrees[0])

    @property
    def max_in_degree(self) -> int:
        return int(self.in_degrees.max())

    @property
    def is_single(self) -> bool:
        return self.n_users == 1 and self.n_caches == 1

    def coverage(self, y: np.ndarray) -> np.ndarray:
        """Per-user total occupancy ``sum_{j in out(i)} y^j``; ``(..., J, N) -> (..., I, N)``."""
        return np.einsum("ij,...jn->...in", self.adjacency, y)

    def aggregate(self, x: np.ndarray) -> np.ndarray:
        """Per-cache sum of in-neighbour vectors; ``(..., I, N) -> (..., J, N)``."""
        return np.einsum("ij,...in->...jn", self.adjacency, x)


def build_topology(n_users: int, n_caches: int, edges: Iterable[Sequence[int]]) -> BipartiteTopology:
    return BipartiteTopology(int(n_users), int(n_caches), tuple((int(i), int(j)) for i, j in edges))


def single_topology() -> BipartiteTopology:
    return build_topology(1, 1, [(0, 0)])


# 1-indexed: cache k -> its users
PAPER_PRESET_CACHES = {1: (1, 2, 3), 2: (4, 5, 6), 3: (7, 8, 9), 4: (1, 3, 10)}


def paper_topology_preset() -> BipartiteTopology:
    """10 users, 4 caches, every cache of in-degree 3."""
    edges = [(u - 1, c - 1) for c, users in PAPER_PRESET_CACHES.items() for u in users]
    edges.sort()
    return build_topology(10, 4, edges)


@dataclass(frozen=True)
class RequestBatch:
    """Requests of one slot: ``files[i, k]`` is the k-th request of user i."""

    files: np.ndarray
    n_files: int

    def __post_init__(self):
        f = np.asarray(self.files, dtype=np.int64)
        if f.ndim == 1:
            f = f[:, None]
        if f.ndim != 2:
            raise ValueError("files must have shape (n_users, r)")
        Catalog(self.n_files).check_ids(f)
        object.__setattr__(self, "files", f)

    @property
    def n_users(self) -> int:
        return self.files.shape[0]

    @property
    def r(self) -> int:
        return self.files.shape[1]

    def dense(self) -> np.ndarray:
        """Integer count matrix of shape ``(n_users, n_files)``; each row sums to r."""
        x = np.zeros((self.n_users, self.n_files))
        rows = np.repeat(np.arange(self.n_users), self.r)
        np.add.at(x, (rows, self.files.ravel()), 1.0)
        return x

    @classmethod
    def one_hot(cls, files: Sequence[int], n_files: int) -> "RequestBatch":
        return cls(np.asarray(files)[:, None], n_files)


@dataclass(frozen=True)
class RequestSequence:
    """Whole request sequence: ``files`` has shape ``(T, n_users, r)``."""

    files: np.ndarray
    n_files: int

    def __post_init__(self):
        f = np.asarray(self.files, dtype=np.int64)
        if f.ndim == 1:
            f = f[:, None, None]
        elif f.ndim == 2:
            f = f[:, :, None]
        if f.ndim != 3:
            raise ValueError("files must have shape (T, n_users, r)")
        Catalog(self.n_files).check_ids(f)
        object.__setattr__(self, "files", f)

    @property
    def T(self) -> int:
        return self.files.shape[0]

    @property
    def n_users(self) -> int:
        return self.files.shape[1]

    @property
    def r(self) -> int:
        return self.files.shape[2]

    def __len__(self) -> int:
        return self.T

    def batch(self, t: int) -> RequestBatch:
        """Requests of slot ``t`` (0-based)."""
        return RequestBatch(self.files[t], self.n_files)

    def __iter__(self):
        for t in range(self.T):
            yield self.batch(t)

    def counts(self, upto: int | None = None) -> np.ndarray:
        """Per-user cumulative request counts over the first ``upto`` slots, shape ``(I, N)``."""
        f = self.files[: self.T if upto is None else upto]
        out = np.zeros((self.n_users, self.n_files))
        users = np.broadcast_to(np.arange(self.n_users)[None, :, None], f.shape)
        np.add.at(out, (users.ravel(), f.ravel()), 1.0)
        return out

    def prefix(self, t: int) -> "RequestSequence":
        return RequestSequence(self.files[:t], self.n_files)


@dataclass
class RunResult:
    """Outcome of one policy on one realized sequence.

    ``regret_series[k]`` is the hindsight reward minus the online cumulative
    reward on the prefix of length ``checkpoints[k]``.
    """

    policy: str
    replication: int
    seed: int
    checkpoints: np.ndarray
    cum_reward_at: np.ndarray
    hindsight_at: np.ndarray
    per_slot_reward: np.ndarray | None = None

    @property
    def T(self) -> int:
        return int(self.checkpoints[-1])

    @property
    def regret_series(self) -> np.ndarray:
        return self.hindsight_at - self.cum_reward_at

    @property
    def cumulative_reward(self) -> float:
        return float(self.cum_reward_at[-1])

    @property
    def hindsight_reward(self) -> float:
        return float(self.hindsight_at[-1])

    @property
    def regret(self) -> float:
        return float(self.regret_series[-1])


def top_c_mask(values: np.ndarray, capacity: int, eligible: np.ndarray | None = None) -> np.ndarray:
    """Boolean mask of the ``capacity`` largest entries along the last axis.

    Ties go to the lowest index. With ``eligible`` given, ineligible entries are
    never selected, so fewer than ``capacity`` entries may be set.
    """
    v = np.asarray(values, dtype=float)
    n = v.shape[-1]
    if capacity >= n:
        mask = np.ones(v.shape, dtype=bool)
        return mask if eligible is None else mask & eligible
    if eligible is not None:
        v = np.where(eligible, v, -np.inf)
    kth = np.partition(v, n - capacity, axis=-1)[..., n - capacity, None]
    above = v > kth
    need = capacity - above.sum(axis=-1, keepdims=True)
    eq = v == kth
    mask = above | (eq & (np.cumsum(eq, axis=-1) <= need))
    if eligible is not None:
        mask &= eligible
    return mask
