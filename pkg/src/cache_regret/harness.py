"""Run policies over request sequences and measure regret against the best static config."""

from __future__ import annotations

import contextlib
import csv
import datetime as _dt
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .adversary import SequenceSpec
from .hindsight import elastic_hindsight_reward, static_opt_elastic, static_opt_inelastic
from .model import (REWARD_KINDS, BipartiteTopology, RunResult, build_topology, check_feasible,
                    paper_topology_preset, single_topology)
from .policies import POLICY_NAMES, make_policy
from .rewards import KahanSum, slot_reward_from_ids
from .trace import capacity_from_alpha

RESULT_FIELDS = ("policy", "replication", "seed", "t", "cum_reward", "hindsight_reward", "regret", "avg_regret")
DEFAULT_CHECKPOINTS = 50
INTERMEDIATE_BUDGET = 500
DEFAULT_ZIPF_FILES = 3700


def resolve_topology(topology) -> BipartiteTopology:
    """Accept a topology, ``"single"``, ``"paper"`` or ``"file:PATH"`` (CSV of ``user,cache`` pairs)."""
    if isinstance(topology, BipartiteTopology):
        return topology
    if topology == "single":
        return single_topology()
    if topology == "paper":
        return paper_topology_preset()
    if isinstance(topology, str) and topology.startswith("file:"):
        return read_topology(topology[5:])
    raise ValueError(f"unknown topology {topology!r}; use single, paper or file:PATH")


def read_topology(path) -> BipartiteTopology:
    edges = []
    with open(path, encoding="utf-8", newline="") as fh:
        for no, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].startswith("#"):
                continue
            if [c.strip() for c in row] == ["user", "cache"]:
                continue
            try:
                edges.append((int(row[0]), int(row[1])))
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{no}: expected 'user,cache' integers") from None
    if not edges:
        raise ValueError(f"{path}: no edges")
    return build_topology(max(e[0] for e in edges) + 1, max(e[1] for e in edges) + 1, edges)


def default_checkpoints(T: int, n: int = DEFAULT_CHECKPOINTS) -> np.ndarray:
    """About ``n`` log-spaced slots in ``1..T``, always ending at T."""
    pts = np.round(np.logspace(0, math.log10(T), n)).astype(np.int64) if T > 1 else np.array([1])
    return np.unique(np.concatenate((pts, [T])))


@dataclass
class ExperimentSpec:
    """One experiment: a reward kind, a topology, a sequence recipe and a list of policies.

    Give either ``capacity`` or ``alpha`` (``C = max(1, round(alpha N))``).
    Policies are names or ``(name, options)`` pairs; ``static`` without a
    ``configs`` option holds the final hindsight optimum of each replication.
    Replication ``k`` uses seed ``base_seed + k`` unless ``seeds`` lists them.
    """

    reward_kind: str
    topology: object
    sequence: SequenceSpec
    policies: Sequence = ("ftpl",)
    T: int | None = None
    replications: int = 1
    base_seed: int = 0
    capacity: int | None = None
    alpha: float | None = None
    n_files: int | None = None
    checkpoints: Sequence[int] | int | None = None
    inelastic_budget: int = 2000
    keep_per_slot: bool = False
    check_feasibility: bool = True
    seeds: Sequence[int] | None = None
    rep_chunk: int = 1024
    jobs: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.reward_kind not in REWARD_KINDS:
            raise ValueError(f"unknown reward kind {self.reward_kind!r}")
        if self.seeds is not None:
            self.seeds = [int(s) for s in self.seeds]
            self.replications = len(self.seeds)
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.T is None:
            self.T = self.sequence.T
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.sequence.T < self.T:
            raise ValueError(f"sequence recipe has T={self.sequence.T}, shorter than T={self.T}")
        if (self.capacity is None) == (self.alpha is None):
            raise ValueError("give exactly one of capacity and alpha")
        self.topology = resolve_topology(self.topology)
        if self.reward_kind == "single" and not self.topology.is_single:
            raise ValueError("single reward requires the single-cache topology")
        if self.reward_kind == "inelastic" and self.sequence.r != 1:
            raise ValueError("inelastic reward requires one request per user per slot")
        self.policies = [_policy_entry(p) for p in self.policies]

    def library(self) -> tuple[int, int]:
        """Resolve ``(N, C)``."""
        N = self.n_files
        if N is None:
            kind = self.sequence.kind
            if kind == "zipf":
                N = DEFAULT_ZIPF_FILES
            elif kind == "alternating":
                N = 2
            elif kind == "trace":
                from .trace import _meta
                meta = _meta(self.sequence.path)
                if meta is None:
                    raise ValueError("trace file lacks its '# N=.. T=..' line")
                N = meta[0]
            elif kind == "custom":
                N = int(np.asarray(self.sequence.files).max()) + 1
            elif self.capacity is None:
                raise ValueError("library size needed to derive capacity from alpha")
            else:
                N = self.sequence.default_support(self.reward_kind, self.topology, self.capacity)
        C = self.capacity if self.capacity is not None else capacity_from_alpha(self.alpha, N)
        if C < 1:
            raise ValueError("capacity must be >= 1")
        return int(N), int(C)


def _policy_entry(p):
    if isinstance(p, str):
        name, opts = p, {}
    else:
        name, opts = p[0], dict(p[1])
    name = name.lower()
    if name not in POLICY_NAMES:
        raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
    return name, opts


def _sequences(spec: ExperimentSpec, N: int, C: int, seeds) -> np.ndarray:
    files = [spec.sequence.generate(spec.topology, N, spec.reward_kind, C, seed=s).files[: spec.T] for s in seeds]
    return np.stack(files)  # (R, T, I, r)


def _hindsight(spec, files, N, C, checkpoints):
    """Hindsight rewards ``(R, K)`` and the final optimal configs ``(R, J, N)``."""
    top = spec.topology
    R, T, I, r = files.shape
    counts = np.zeros((R, I, N))
    reps = np.arange(R)[:, None, None, None]
    users = np.arange(I)[None, None, :, None]
    out = np.zeros((R, len(checkpoints)))
    configs = [None] * R
    prev = 0
    for k, t in enumerate(checkpoints):
        seg = files[:, prev:t]
        np.add.at(counts, (np.broadcast_to(reps, seg.shape), np.broadcast_to(users, seg.shape), seg), 1.0)
        prev = t
        if spec.reward_kind != "inelastic":
            out[:, k] = elastic_hindsight_reward(top, counts, C)
            continue
        budget = spec.inelastic_budget if t == checkpoints[-1] else min(INTERMEDIATE_BUDGET, spec.inelastic_budget)
        for q in range(R):
            sol = static_opt_inelastic(top, counts[q], C, budget=budget, warm_start=configs[q])
            configs[q] = sol.configs
            out[q, k] = sol.reward
    if spec.reward_kind != "inelastic":
        configs = [static_opt_elastic(top, counts[q], C).configs for q in range(R)]
    return out, np.stack(configs)


def _dense(files_t: np.ndarray, N: int) -> np.ndarray:
    R, I, r = files_t.shape
    x = np.zeros((R, I, N))
    if r == 1:
        x[np.arange(R)[:, None], np.arange(I)[None], files_t[:, :, 0]] = 1.0
    else:
        np.add.at(x, (np.arange(R)[:, None, None], np.arange(I)[None, :, None], files_t), 1.0)
    return x


def run_policy(policy, kind: str, topology: BipartiteTopology, files: np.ndarray, N: int, C: int,
               seeds, checkpoints, keep_per_slot: bool = False, check_feasibility: bool = True):
    """Drive one policy over ``files`` ``(R, T, I, r)``; returns cumulative rewards ``(R, K)``.

    Each slot commits the config first, scores it, and only then reveals the
    requests. With ``keep_per_slot`` the per-slot rewards ``(R, T)`` are
    returned as well.
    """
    R, T = files.shape[:2]
    policy.reset(topology, N, C, seeds=seeds, horizon=T)
    acc = KahanSum(R)
    cum = np.zeros((R, len(checkpoints)))
    per_slot = np.zeros((R, T)) if keep_per_slot else None
    marks = {int(t): k for k, t in enumerate(checkpoints)}
    for t in range(1, T + 1):
        y = policy.commit(t)
        if check_feasibility:
            check_feasible(y, C)
        f = files[:, t - 1]
        reward = slot_reward_from_ids(kind, topology, f, y)
        acc.add(reward)
        if per_slot is not None:
            per_slot[:, t - 1] = reward
        policy.observe(_dense(f, N))
        if t in marks:
            cum[:, marks[t]] = acc.total
    return cum, per_slot


def _policy_job(args):
    name, opts, kind, topology, files, N, C, seeds, checkpoints, keep, check = args
    return run_policy(make_policy(name, kind, **opts), kind, topology, files, N, C, seeds, checkpoints, keep, check)


def run_experiment(spec: ExperimentSpec) -> list[RunResult]:
    """Every policy on every replication; results ordered by policy, then replication."""
    N, C = spec.library()
    T = spec.T
    if spec.checkpoints is None or isinstance(spec.checkpoints, int):
        checkpoints = default_checkpoints(T, spec.checkpoints or DEFAULT_CHECKPOINTS)
    else:
        checkpoints = np.unique(np.asarray(spec.checkpoints, dtype=np.int64))
        if checkpoints[0] < 1 or checkpoints[-1] > T:
            raise ValueError("checkpoints must lie in 1..T")
        if checkpoints[-1] != T:
            checkpoints = np.append(checkpoints, T)
    all_seeds = spec.seeds or [spec.base_seed + k for k in range(spec.replications)]
    per_policy: dict[int, list[RunResult]] = {k: [] for k in range(len(spec.policies))}
    for lo in range(0, spec.replications, spec.rep_chunk):
        seeds = all_seeds[lo: lo + spec.rep_chunk]
        files = _sequences(spec, N, C, seeds)
        hind, opt_configs = _hindsight(spec, files, N, C, checkpoints)
        jobs = []
        for name, opts in spec.policies:
            if name == "static" and "configs" not in opts:
                opts = dict(opts, configs=opt_configs)
            jobs.append((name, opts, spec.reward_kind, spec.topology, files, N, C, seeds, checkpoints,
                         spec.keep_per_slot, spec.check_feasibility))
        if spec.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
                outcomes = list(pool.map(_policy_job, jobs))
        else:
            outcomes = [_policy_job(job) for job in jobs]
        for k, ((name, _), (cum, per_slot)) in enumerate(zip(spec.policies, outcomes)):
            for q, s in enumerate(seeds):
                per_policy[k].append(RunResult(
                    policy=name, replication=lo + q, seed=s, checkpoints=checkpoints.copy(),
                    cum_reward_at=cum[q], hindsight_at=hind[q],
                    per_slot_reward=None if per_slot is None else per_slot[q]))
    results = [r for k in range(len(spec.policies)) for r in per_policy[k]]
    if spec.output:
        emit_results(results, spec.output, "json" if str(spec.output).endswith(".json") else "csv")
    return results


@dataclass
class RegretSummary:
    policy: str
    T: int
    mean_regret: float
    std_error: float
    replications: int
    mean_series: np.ndarray = field(repr=False)

    @property
    def avg_regret(self) -> float:
        return self.mean_regret / self.T


def summarize(results: Sequence[RunResult]) -> dict[str, RegretSummary]:
    """Mean final regret and its standard error per policy, in first-seen order."""
    groups: dict[str, list[RunResult]] = {}
    for r in results:
        groups.setdefault(r.policy, []).append(r)
    out = {}
    for name, rs in groups.items():
        final = np.array([r.regret for r in rs])
        se = float(final.std(ddof=1) / math.sqrt(final.size)) if final.size > 1 else 0.0
        series = np.mean([r.regret_series for r in rs], axis=0)
        out[name] = RegretSummary(name, rs[0].T, float(final.mean()), se, final.size, series)
    return out


def capacity_sweep(spec: ExperimentSpec, alphas: Sequence[float]) -> list[dict]:
    """Rerun ``spec`` with ``C = max(1, round(alpha N))`` for each alpha.

    Returns one row per (alpha, policy) with the mean time-averaged regret at T.
    """
    rows = []
    for alpha in alphas:
        if not 0 < alpha <= 1:
            raise ValueError("alphas must lie in (0, 1]")
        N, _ = spec.library() if spec.n_files is None else (spec.n_files, None)
        sub = ExperimentSpec(**{**spec.__dict__, "alpha": alpha, "capacity": None, "n_files": N,
                                "output": None, "policies": list(spec.policies)})
        C = sub.library()[1]
        for name, s in summarize(run_experiment(sub)).items():
            rows.append(dict(alpha=alpha, C=C, policy=name, avg_regret=s.avg_regret,
                             std_error=s.std_error / s.T, replications=s.replications))
    return rows


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def result_rows(results: Sequence[RunResult]):
    for r in results:
        for k, t in enumerate(r.checkpoints):
            regret = r.hindsight_at[k] - r.cum_reward_at[k]
            yield (r.policy, int(r.replication), int(r.seed), int(t), float(r.cum_reward_at[k]),
                   float(r.hindsight_at[k]), float(regret), float(regret) / int(t))


def meta_line(**info) -> str:
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    extra = " ".join(f"{k}={v}" for k, v in info.items())
    return f"# cache_regret generated={stamp}" + (f" {extra}" if extra else "")


@contextlib.contextmanager
def _open_target(path):
    if hasattr(path, "write"):
        yield path
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        yield fh


def emit_results(results: Sequence[RunResult], path, fmt: str = "csv", meta: str | None = None) -> None:
    """Write results (to a path or open stream) as CSV (``policy,replication,seed,t,...``) or as JSON with the same fields."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    rows = list(result_rows(results))
    with _open_target(path) as fh:
        if fmt == "csv":
            if meta:
                fh.write(meta + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_FIELDS)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
            return
        rounded = [[float(_fmt(v)) if isinstance(v, float) else v for v in row] for row in rows]
        doc = {"columns": list(RESULT_FIELDS), "rows": [dict(zip(RESULT_FIELDS, row)) for row in rounded]}
        if meta:
            doc = {"meta": meta.lstrip("# "), **doc}
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_results(path) -> list[RunResult]:
    """Parse a file written by :func:`emit_results` back into run results."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        rows = [[d[k] for k in RESULT_FIELDS] for d in json.loads(text)["rows"]]
    else:
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.reader(lines)
        if tuple(next(reader, ())) != RESULT_FIELDS:
            raise ValueError(f"{path}: unexpected header")
        rows = list(reader)
    groups: dict[tuple, list] = {}
    for row in rows:
        key = (row[0], int(row[1]), int(row[2]))
        groups.setdefault(key, []).append((int(row[3]), float(row[4]), float(row[5])))
    out = []
    for (policy, rep, seed), pts in groups.items():
        pts = np.array(pts)
        out.append(RunResult(policy, rep, seed, pts[:, 0].astype(np.int64), pts[:, 1], pts[:, 2]))
    return out


__all__ = [
    "ExperimentSpec", "RegretSummary", "run_experiment", "run_policy", "summarize", "capacity_sweep",
    "emit_results", "read_results", "default_checkpoints", "resolve_topology", "read_topology",
    "RESULT_FIELDS", "meta_line",
]
