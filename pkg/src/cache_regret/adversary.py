"""Request sequences used by the lower-bound constructions plus deterministic worst cases."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import streams
from .model import BipartiteTopology, RequestSequence

SEQUENCE_KINDS = ("uniform_support", "identical_users", "alternating", "zipf", "trace", "custom")


def uniform_support_sequence(T: int, support_size: int, r: int = 1, seed: int = 0,
                             n_files: int | None = None) -> RequestSequence:
    """One user; every slot holds ``r`` independent uniform draws from ``{0..support_size-1}``."""
    n_files = support_size if n_files is None else int(n_files)
    if support_size < 1 or r < 1 or T < 0:
        raise ValueError("support_size and r must be >= 1, T >= 0")
    if support_size > n_files:
        raise ValueError(f"support size {support_size} exceeds library size {n_files}")
    rng = streams.substream(seed, streams.SEQUENCE)
    files = rng.integers(0, support_size, size=(T, 1, r))
    return RequestSequence(files, n_files)


def identical_users_sequence(topology: BipartiteTopology, T: int, support_size: int, seed: int = 0,
                             n_files: int | None = None) -> RequestSequence:
    """Every user requests the same uniformly drawn file in each slot."""
    n_files = support_size if n_files is None else int(n_files)
    if support_size > n_files:
        raise ValueError(f"support size {support_size} exceeds library size {n_files}")
    rng = streams.substream(seed, streams.SEQUENCE)
    draw = rng.integers(0, support_size, size=(T, 1, 1))
    files = np.broadcast_to(draw, (T, topology.n_users, 1)).copy()
    return RequestSequence(files, n_files)


def identical_support(kind: str, topology: BipartiteTopology, capacity: int) -> int:
    """Support used by the identical-user adversary: ``2C``, or ``2CJ`` for inelastic rewards."""
    if kind == "inelastic":
        return 2 * capacity * topology.n_caches
    return 2 * capacity


def alternating_sequence(T: int, n_files: int = 2, n_users: int = 1) -> RequestSequence:
    """Files 0, 1, 0, 1, ... requested by every user."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if n_files < 2:
        raise ValueError("alternating sequence needs at least two files")
    files = np.broadcast_to((np.arange(T) % 2)[:, None, None], (T, n_users, 1)).copy()
    return RequestSequence(files, n_files)


@dataclass
class SequenceSpec:
    """Recipe for a request sequence; :meth:`generate` realizes it for one seed.

    ``support_size=None`` picks the adversary's default (``2C``, or ``2CJ`` for
    the inelastic identical-user construction).
    """

    kind: str
    T: int
    support_size: int | None = None
    r: int = 1
    seed: int = 0
    exponent: float = 0.8
    path: str | None = None
    files: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in SEQUENCE_KINDS:
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.kind == "custom" and self.files is None:
            raise ValueError("custom sequences need explicit files")
        if self.kind == "trace" and self.path is None:
            raise ValueError("trace sequences need a path")

    def default_support(self, reward_kind: str, topology: BipartiteTopology, capacity: int) -> int:
        if self.support_size is not None:
            return int(self.support_size)
        if self.kind == "identical_users":
            return identical_support(reward_kind, topology, capacity)
        if self.kind == "alternating":
            return 2
        return 2 * capacity

    def generate(self, topology: BipartiteTopology, n_files: int, reward_kind: str = "single",
                 capacity: int = 1, seed: int | None = None) -> RequestSequence:
        seed = self.seed if seed is None else seed
        I = topology.n_users
        if self.kind == "uniform_support":
            S = self.default_support(reward_kind, topology, capacity)
            if S > n_files:
                raise ValueError(f"support size {S} exceeds library size {n_files}")
            rng = streams.substream(seed, streams.SEQUENCE)
            return RequestSequence(rng.integers(0, S, size=(self.T, I, self.r)), n_files)
        if self.kind == "identical_users":
            if self.r != 1:
                raise ValueError("identical-user adversary uses one request per slot")
            S = self.default_support(reward_kind, topology, capacity)
            return identical_users_sequence(topology, self.T, S, seed, n_files)
        if self.kind == "alternating":
            return alternating_sequence(self.T, n_files, I)
        if self.kind == "zipf":
            from .trace import zipf_sequence
            rng = streams.substream(seed, streams.SEQUENCE)
            draws = [zipf_sequence(n_files, self.exponent, self.T * self.r, rng=rng).files.reshape(self.T, self.r)
                     for _ in range(I)]
            return RequestSequence(np.stack(draws, axis=1), n_files)
        if self.kind == "trace":
            from .trace import read_streams
            seq = read_streams(self.path)
            if seq.n_users != I:
                raise ValueError(f"trace has {seq.n_users} user streams, topology has {I} users")
            if seq.T < self.T:
                raise ValueError(f"trace holds {seq.T} slots, fewer than T={self.T}")
            if seq.n_files > n_files:
                raise ValueError(f"trace uses {seq.n_files} files, more than N={n_files}")
            return RequestSequence(seq.files[: self.T], n_files)
        files = np.asarray(self.files)
        seq = RequestSequence(files, n_files)
        if seq.T < self.T:
            raise ValueError(f"custom sequence holds {seq.T} slots, fewer than T={self.T}")
        if seq.n_users != I:
            raise ValueError(f"custom sequence has {seq.n_users} users, topology has {I}")
        return RequestSequence(seq.files[: self.T], n_files)


__all__ = [
    "SequenceSpec", "SEQUENCE_KINDS", "uniform_support_sequence", "identical_users_sequence",
    "identical_support", "alternating_sequence",
]
