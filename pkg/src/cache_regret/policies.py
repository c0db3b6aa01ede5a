"""Online caching policies.

Every policy follows the same sequential contract: ``commit(t)`` returns the
configuration used to score slot ``t`` and only then ``observe(batch)`` reveals
that slot's requests. A policy instance drives all caches of a topology for a
batch of independent replications at once; its arrays are laid out as
``(replications, caches, files)``. Each cache runs its own copy of the
single-cache rule on the requests of its in-neighbours.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import streams
from .geometry import project_capped_simplex_batch, supergradient
from .model import BipartiteTopology, RequestBatch, top_c_mask


def default_eta(kind: str, T: int, C: int, N: float | None = None, d: int = 1, r: int = 1) -> float:
    """Prescribed FTPL noise scale or OGA step size.

    ``ftpl``: ``d (4 pi log N)^(-1/4) sqrt(T/C)`` (``d=1`` is the single cache).
    ``oga``: ``sqrt(2C) / (d sqrt(r T))``.
    """
    if T < 1 or C < 1 or d < 1:
        raise ValueError("T, C and d must be >= 1")
    if kind == "ftpl":
        if N is None or N < 2:
            raise ValueError("FTPL noise scale needs a library of at least 2 files")
        return d * (4.0 * math.pi * math.log(N)) ** -0.25 * math.sqrt(T / C)
    if kind == "oga":
        return math.sqrt(2.0 * C) / (d * math.sqrt(r * T))
    raise ValueError(f"no default eta for policy {kind!r}")


def _requested_ids(req: np.ndarray) -> np.ndarray:
    """Ascending requested ids per row of a boolean ``(B, N)`` mask, padded with -1."""
    rows, cols = np.nonzero(req)
    B = req.shape[0]
    counts = np.bincount(rows, minlength=B)
    K = int(counts.max()) if counts.size else 0
    ids = np.full((B, K), -1, dtype=np.int64)
    if K:
        starts = np.cumsum(counts) - counts
        pos = np.arange(rows.size) - np.repeat(starts, counts)
        ids[rows, pos] = cols
    return ids


class Policy:
    name = "policy"
    uncoded = True

    def __init__(self):
        self._t = None

    def reset(self, topology: BipartiteTopology, n_files: int, capacity: int,
              seeds: Sequence[int] = (0,), horizon: int | None = None) -> "Policy":
        self.topology = topology
        self.N = int(n_files)
        self.C = int(capacity)
        self.seeds = [int(s) for s in seeds]
        self.R = len(self.seeds)
        self.J = topology.n_caches
        self.horizon = horizon
        self._t = 1
        self._committed = None
        self._init_state()
        return self

    @property
    def lanes(self) -> int:
        return self.R * self.J

    def _init_state(self):
        pass

    def _config(self) -> np.ndarray:
        raise NotImplementedError

    def _update(self, x: np.ndarray) -> None:
        raise NotImplementedError

    def commit(self, t: int | None = None) -> np.ndarray:
        """Configuration for slot ``t``, shape ``(R, J, N)``."""
        if self._t is None:
            raise RuntimeError(f"{self.name}: commit before reset")
        if t is not None and t != self._t:
            raise ValueError(f"{self.name}: expected slot {self._t}, got {t}")
        if self._committed is None:
            self._committed = self._config()
        return self._committed

    def observe(self, batch) -> None:
        """Reveal the requests of the current slot and advance to the next one."""
        if self._t is None:
            raise RuntimeError(f"{self.name}: observe before reset")
        if isinstance(batch, RequestBatch):
            x = batch.dense()[None]
        else:
            x = np.asarray(batch, dtype=float)
            if x.ndim == 2:
                x = x[None]
        if x.shape != (self.R, self.topology.n_users, self.N):
            raise ValueError(f"{self.name}: request shape {x.shape} does not match "
                             f"{(self.R, self.topology.n_users, self.N)}")
        self._update(x)
        self._t += 1
        self._committed = None

    def _lane_counts(self, x):
        return self.topology.aggregate(x).reshape(self.lanes, self.N)

    def _as_configs(self, lanes_mask):
        return lanes_mask.reshape(self.R, self.J, self.N).astype(float)


class StaticFixed(Policy):
    """Holds one configuration forever."""

    name = "static"

    def __init__(self, configs):
        super().__init__()
        self.configs = np.asarray(configs, dtype=float)
        self.uncoded = bool(np.all((self.configs == 0) | (self.configs == 1)))

    def _init_state(self):
        y = self.configs
        if y.ndim == 2:
            y = np.broadcast_to(y, (self.R,) + y.shape)
        if y.shape != (self.R, self.J, self.N):
            raise ValueError(f"static config shape {y.shape} does not fit {(self.R, self.J, self.N)}")
        self._y = np.array(y)

    def _config(self):
        return self._y

    def _update(self, x):
        pass


def _prefill(N: int, C: int) -> np.ndarray:
    # initial residents of the demand policies: the C highest ids, oldest first
    return np.arange(max(0, N - C), N)


class LRU(Policy):
    """Least recently used with insert on miss.

    Equivalent to keeping the C most recently requested distinct files. Within
    a slot, requested files count as accessed in ascending id order. With
    ``prefill`` (default) the cache starts full with the C highest file ids,
    all older than any request; otherwise it starts empty.
    """

    name = "lru"

    def __init__(self, prefill: bool = True):
        super().__init__()
        self.prefill = prefill

    def _init_state(self):
        self._last = np.full((self.lanes, self.N), -np.inf)
        if self.prefill:
            f = _prefill(self.N, self.C)
            self._last[:, f] = f - self.N

    def _config(self):
        seen = np.isfinite(self._last)
        return self._as_configs(top_c_mask(self._last, self.C, eligible=seen))

    def _update(self, x):
        req = self._lane_counts(x) > 0
        stamp = self._t * self.N + np.arange(self.N, dtype=float)
        self._last = np.where(req, stamp, self._last)


class _Resident(Policy):
    """Shared state for demand policies that insert every missed file."""

    def __init__(self, prefill: bool = True):
        super().__init__()
        self.prefill = prefill

    def _init_state(self):
        self._resident = np.zeros((self.lanes, self.N), dtype=bool)
        self._size = np.zeros(self.lanes, dtype=np.int64)
        if self.prefill:
            f = _prefill(self.N, self.C)
            self._resident[:, f] = True
            self._size[:] = f.size

    def _config(self):
        return self._as_configs(self._resident)

    def _victims(self, lanes: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _inserted(self, lanes, files, k):
        pass

    def _access(self, req):
        ids = _requested_ids(req)
        for k in range(ids.shape[1]):
            f = ids[:, k]
            lanes = np.flatnonzero(f >= 0)
            f = f[lanes]
            miss = ~self._resident[lanes, f]
            lanes, f = lanes[miss], f[miss]
            if lanes.size == 0:
                continue
            full = self._size[lanes] >= self.C
            if np.any(full):
                ev_lanes = lanes[full]
                ev = self._victims(ev_lanes)
                self._resident[ev_lanes, ev] = False
                self._size[ev_lanes] -= 1
            self._resident[lanes, f] = True
            self._size[lanes] += 1
            self._inserted(lanes, f, k)


class FIFO(_Resident):
    """First in, first out: a miss evicts the longest-resident file."""

    name = "fifo"

    def _init_state(self):
        super()._init_state()
        self._since = np.full((self.lanes, self.N), np.inf)
        self._tick = 0
        if self.prefill:
            f = _prefill(self.N, self.C)
            self._since[:, f] = f - self.N

    def _victims(self, lanes):
        return np.argmin(np.where(self._resident[lanes], self._since[lanes], np.inf), axis=1)

    def _inserted(self, lanes, files, k):
        self._tick += 1
        self._since[lanes, files] = self._tick

    def _update(self, x):
        self._access(self._lane_counts(x) > 0)


class LFU(_Resident):
    """Least frequently used over global request counts.

    ``mode="demand"`` (default) inserts every missed file and evicts the
    resident with the smallest count, keeping the lower id on ties.
    ``mode="perfect"`` caches the top-C counts outright (follow the leader).
    """

    name = "lfu"

    def __init__(self, mode: str = "demand", prefill: bool = True):
        super().__init__(prefill)
        if mode not in ("demand", "perfect"):
            raise ValueError(f"unknown LFU mode {mode!r}")
        self.mode = mode

    def _init_state(self):
        super()._init_state()
        self._counts = np.zeros((self.lanes, self.N))

    def _config(self):
        if self.mode == "perfect":
            return self._as_configs(top_c_mask(self._counts, self.C))
        return super()._config()

    def _victims(self, lanes):
        c = np.where(self._resident[lanes], self._counts[lanes], np.inf)
        return self.N - 1 - np.argmin(c[:, ::-1], axis=1)

    def _update(self, x):
        agg = self._lane_counts(x)
        self._counts += agg
        if self.mode == "demand":
            self._access(agg > 0)


class FTPL(Policy):
    """Follow the perturbed leader.

    Each slot draws fresh standard Gaussian noise per cache and file and caches
    the top C of ``counts + eta * noise``. Each (replication, cache) lane has
    its own noise stream, indexed by cache id plus ``stream_offset``.
    """

    name = "ftpl"
    chunk_budget = 1 << 21

    def __init__(self, eta: float | None = None, stream_offset: int = 0):
        super().__init__()
        self.eta = eta
        self.stream_offset = int(stream_offset)

    def _init_state(self):
        if self.eta is None:
            if self.horizon is None:
                raise ValueError("FTPL needs eta or a horizon for the default noise scale")
            d = 1 if self.topology.is_single else self.topology.max_in_degree
            self.eta_ = default_eta("ftpl", self.horizon, self.C, self.N, d)
        else:
            self.eta_ = float(self.eta)
        self._counts = np.zeros((self.lanes, self.N))
        self._gens = [streams.substream(s, streams.NOISE, self.stream_offset + j)
                      for s in self.seeds for j in range(self.J)]
        self._chunk = max(1, min(1024, self.chunk_budget // max(1, self.lanes * self.N)))
        self._buf = None
        self._buf_start = None

    def noise(self, t: int) -> np.ndarray:
        """Noise rows ``(lanes, N)`` for slot ``t``; independent of how often it is called."""
        start = ((t - 1) // self._chunk) * self._chunk + 1
        if self._buf_start != start:
            if self._buf_start is not None and start < self._buf_start:
                raise ValueError("noise for past slots is no longer buffered")
            prev = 1 - self._chunk if self._buf_start is None else self._buf_start
            skip = (start - prev) // self._chunk - 1
            for _ in range(skip):
                for g in self._gens:
                    g.standard_normal((self._chunk, self.N))
            self._buf = np.stack([g.standard_normal((self._chunk, self.N)) for g in self._gens], axis=1)
            self._buf_start = start
        return self._buf[t - start]

    def _config(self):
        score = self._counts
        if self.eta_ != 0.0:
            score = score + self.eta_ * self.noise(self._t)
        return self._as_configs(top_c_mask(score, self.C))

    def _update(self, x):
        self._counts += self._lane_counts(x)


class OGA(Policy):
    """Online gradient ascent with Euclidean projection per cache (coded caching)."""

    name = "oga"
    uncoded = False

    def __init__(self, kind: str = "single", eta: float | None = None, grad_mode: str = "masked", r: int = 1):
        super().__init__()
        self.kind = kind
        self.eta = eta
        self.grad_mode = grad_mode
        self.r = r

    def _init_state(self):
        if self.eta is None:
            if self.horizon is None:
                raise ValueError("OGA needs eta or a horizon for the default step size")
            d = 1 if self.topology.is_single else self.topology.max_in_degree
            self.eta_ = default_eta("oga", self.horizon, self.C, d=d, r=self.r)
        else:
            self.eta_ = float(self.eta)
        self._y = np.full((self.R, self.J, self.N), min(1.0, self.C / self.N))

    def _config(self):
        return self._y

    def _update(self, x):
        g = supergradient(self.kind, self.topology, x, self._y, mode=self.grad_mode)
        step = (self._y + self.eta_ * g).reshape(self.lanes, self.N)
        y, _ = project_capped_simplex_batch(step, self.C)
        self._y = y.reshape(self.R, self.J, self.N)


def ftpl_network(topology: BipartiteTopology, n_files: int, capacity: int, horizon: int | None = None,
                 seeds: Sequence[int] = (0,), eta: float | None = None) -> FTPL:
    """Independent FTPL at every cache, each counting only its in-neighbours' requests."""
    return FTPL(eta=eta).reset(topology, n_files, capacity, seeds=seeds, horizon=horizon)


POLICY_NAMES = ("lru", "lfu", "fifo", "ftpl", "oga", "static")


def make_policy(name: str, kind: str = "single", **options) -> Policy:
    """Build a policy by name; ``static`` needs ``configs=``."""
    name = name.lower()
    if name == "lru":
        return LRU(**options)
    if name == "fifo":
        return FIFO(**options)
    if name == "lfu":
        return LFU(**options)
    if name == "ftpl":
        return FTPL(**options)
    if name == "oga":
        return OGA(kind=kind, **options)
    if name == "static":
        return StaticFixed(**options)
    raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
