"""Request traces: loading, block partitioning into user streams, and Zipf workloads."""

from __future__ import annotations

import contextlib
import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import streams
from .model import Catalog, RequestSequence

TRACE_FORMATS = ("csv", "movielens_dat")
CSV_HEADER = ("user", "item", "timestamp")
_META = re.compile(r"^#\s*N=(\d+)\s+T=(\d+)\s*$")


class TraceParseError(ValueError):
    """Malformed trace input; ``line`` is 1-based."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


@dataclass(frozen=True)
class TraceEvent:
    timestamp: int
    user_raw: str
    file: int


@dataclass(frozen=True)
class EventLog:
    """Array-backed event list, sorted by timestamp."""

    timestamps: np.ndarray
    users: np.ndarray
    files: np.ndarray
    item_ids: tuple = ()

    def __len__(self) -> int:
        return int(self.files.size)

    def __getitem__(self, k: int) -> TraceEvent:
        return TraceEvent(int(self.timestamps[k]), str(self.users[k]), int(self.files[k]))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]


def _rows(path: Path, fmt: str):
    """Yield ``(line_no, user, item, timestamp)`` as raw strings/ints."""
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "movielens_dat":
            for no, line in enumerate(fh, 1):
                line = line.rstrip("\r\n")
                if not line.strip():
                    continue
                parts = line.split("::")
                if len(parts) != 4:
                    raise TraceParseError(path, no, f"expected user::item::rating::timestamp, got {line!r}")
                user, item, _rating, ts = parts
                yield no, user, item, _int(path, no, ts, "timestamp")
            return
        header_seen = False
        for no, row in enumerate(csv.reader(fh), 1):
            if not row or (row[0].startswith("#") and not header_seen):
                continue
            if not header_seen:
                if tuple(c.strip() for c in row) != CSV_HEADER:
                    raise TraceParseError(path, no, f"expected header {','.join(CSV_HEADER)}")
                header_seen = True
                continue
            if len(row) != 3:
                raise TraceParseError(path, no, f"expected 3 columns, got {len(row)}")
            yield no, row[0].strip(), row[1].strip(), _int(path, no, row[2], "timestamp")


def _int(path, no, text, what) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise TraceParseError(path, no, f"bad {what} {text!r}") from None


def _meta(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                return None
            m = _META.match(line.strip())
            if m:
                return int(m.group(1)), int(m.group(2))
    return None


def load_trace(path, fmt: str = "csv") -> tuple[Catalog, EventLog]:
    """Load a trace and remap items to dense ids in first-appearance order.

    Events are sorted by timestamp, keeping input order on ties. Canonical
    files written by :func:`export_sequence` carry a ``# N=.. T=..`` line;
    their item ids are already dense and are kept as is.
    """
    path = Path(path)
    if fmt not in TRACE_FORMATS:
        raise ValueError(f"unknown trace format {fmt!r}")
    meta = _meta(path) if fmt == "csv" else None
    users, items, stamps = [], [], []
    lines = []
    for no, user, item, ts in _rows(path, fmt):
        users.append(user)
        items.append(item)
        stamps.append(ts)
        lines.append(no)
    if not items:
        raise TraceParseError(path, 1, "trace holds no events")
    if meta is not None:
        n = meta[0]
        try:
            files = np.array([int(i) for i in items], dtype=np.int64)
        except ValueError:
            raise TraceParseError(path, lines[0], "canonical trace items must be integers") from None
        bad = np.flatnonzero((files < 0) | (files >= n))
        if bad.size:
            raise TraceParseError(path, lines[bad[0]], f"item {files[bad[0]]} outside 0..{n - 1}")
        item_ids = tuple(range(n))
    else:
        mapping: dict[str, int] = {}
        files = np.array([mapping.setdefault(i, len(mapping)) for i in items], dtype=np.int64)
        item_ids = tuple(mapping)
        n = len(mapping)
    stamps = np.array(stamps, dtype=np.int64)
    order = np.argsort(stamps, kind="stable")
    log = EventLog(stamps[order], np.array(users, dtype=object)[order], files[order], item_ids)
    return Catalog(n), log


def partition_blocks(events, n_users: int) -> np.ndarray:
    """Split events into ``n_users`` contiguous blocks; returns file ids ``(T, n_users)``.

    Blocks have ``len // n_users`` events except the last, which absorbs the
    remainder; T is the shortest block length, so the remainder is unused.
    """
    files = events.files if isinstance(events, EventLog) else np.asarray(events, dtype=np.int64)
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    if files.size < n_users:
        raise ValueError(f"{files.size} events cannot fill {n_users} user blocks")
    T = files.size // n_users
    return np.stack([files[k * T:(k + 1) * T] for k in range(n_users)], axis=1)


def zipf_probabilities(n_files: int, exponent: float) -> np.ndarray:
    if n_files < 1:
        raise ValueError("n_files must be >= 1")
    if exponent < 0:
        raise ValueError("exponent must be >= 0")
    w = np.arange(1, n_files + 1, dtype=float) ** -float(exponent)
    return w / w.sum()


def zipf_sequence(n_files: int, exponent: float, T: int, seed: int = 0,
                  rng: np.random.Generator | None = None) -> RequestSequence:
    """Single-user i.i.d. draws with ``P(k)`` proportional to ``(k+1)^-exponent``."""
    cdf = np.cumsum(zipf_probabilities(n_files, exponent))
    cdf[-1] = 1.0
    rng = streams.substream(seed, streams.SEQUENCE) if rng is None else rng
    files = np.minimum(np.searchsorted(cdf, rng.random(T), side="right"), n_files - 1)
    return RequestSequence(files[:, None, None], n_files)


def export_sequence(seq: RequestSequence, path, meta: bool = True) -> None:
    """Write a sequence (to a path or open stream) as a canonical CSV trace: user k, slot t as timestamp."""
    T, I, r = seq.files.shape
    with (contextlib.nullcontext(path) if hasattr(path, "write")
          else open(path, "w", encoding="utf-8", newline="")) as fh:
        if meta:
            fh.write(f"# N={seq.n_files} T={T}\n")
        fh.write(",".join(CSV_HEADER) + "\n")
        for t in range(T):
            for i in range(I):
                for k in range(r):
                    fh.write(f"{i},{seq.files[t, i, k]},{t}\n")


def read_streams(path) -> RequestSequence:
    """Read a canonical CSV trace back into a per-user sequence.

    Every user must have the same number of requests in every slot.
    """
    path = Path(path)
    meta = _meta(path)
    if meta is None:
        raise TraceParseError(path, 1, "missing '# N=<n> T=<t>' line of a canonical trace")
    n, T = meta
    rows = [(no, _int(path, no, u, "user"), _int(path, no, f, "item"), ts) for no, u, f, ts in _rows(path, "csv")]
    if not rows:
        raise TraceParseError(path, 1, "trace holds no events")
    users = np.array([row[1] for row in rows])
    stamps = np.array([row[3] for row in rows])
    files = np.array([row[2] for row in rows])
    I = int(users.max()) + 1
    if users.min() < 0 or stamps.min() < 0 or stamps.max() >= T:
        raise TraceParseError(path, rows[0][0], "user ids and timestamps must be in range")
    per = np.bincount(stamps * I + users, minlength=T * I)
    r = int(per[0])
    if r == 0 or np.any(per != r):
        raise TraceParseError(path, rows[0][0], "every user needs the same number of requests per slot")
    order = np.lexsort((users, stamps))
    return RequestSequence(files[order].reshape(T, I, r), n)


def capacity_from_alpha(alpha: float, n_files: int) -> int:
    """``max(1, round(alpha * N))`` with halves rounded up."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return max(1, int(math.floor(alpha * n_files + 0.5)))


__all__ = [
    "TraceEvent", "EventLog", "TraceParseError", "load_trace", "partition_blocks", "zipf_sequence",
    "zipf_probabilities", "export_sequence", "read_streams", "capacity_from_alpha",
]
