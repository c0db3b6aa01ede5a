"""Closed-form regret bounds, binomial deviation formulas and a balls-into-bins sampler."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import streams

EXACT_MAD_MAX_T = 50
MC_SHARD = 8192
FTPL_CONSTANT = 1.51
SETTINGS = ("theorem1", "single", "elastic", "inelastic")
BOUND_FIELDS = ("name", "setting", "T", "C", "N", "d", "J", "r", "value", "side")


@dataclass
class BoundReport:
    name: str
    setting: str
    value: float
    side: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"{self.name}: bound value is not finite")
        if self.side not in ("lower", "upper", "exact"):
            raise ValueError(f"unknown side {self.side!r}")


@dataclass
class MCEstimate:
    mean: float
    std_error: float
    trials: int
    seed: int


def _positive(name, value):
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")


def mad_exact_fraction(T: int) -> Fraction:
    """``E|Z - T/2|`` for ``Z ~ Bin(T, 1/2)`` as an exact rational."""
    _positive("T", T)
    k = T // 2 + 1
    return Fraction(k * math.comb(T, k), 2 ** T)


def mad_exact(T: int) -> float:
    """Mean absolute deviation of a symmetric binomial, ``(k/2^T) binom(T, k)`` with ``k = floor(T/2)+1``."""
    _positive("T", T)
    if T <= EXACT_MAD_MAX_T:
        return float(mad_exact_fraction(T))
    k = T // 2 + 1
    log = math.log(k) + math.lgamma(T + 1) - math.lgamma(k + 1) - math.lgamma(T - k + 1) - T * math.log(2.0)
    return math.exp(log)


def mad_lower_bound(T: float) -> float:
    """``sqrt(T / 2 pi) - 1 / (2 sqrt(2 pi T))``."""
    if T <= 0:
        raise ValueError("T must be positive")
    return math.sqrt(T / (2 * math.pi)) - 1.0 / (2.0 * math.sqrt(2 * math.pi * T))


def robbins_log_bounds(n: int) -> tuple[float, float]:
    """Lower and upper bounds on ``log n!``."""
    _positive("n", n)
    base = 0.5 * math.log(2 * math.pi) + (n + 0.5) * math.log(n) - n
    return base + 1.0 / (12 * n + 1), base + 1.0 / (12 * n)


def robbins_bounds(n: int) -> tuple[float, float]:
    """Lower and upper bounds on ``n!``; overflow to ``inf`` past ``n = 170``."""
    lo, hi = robbins_log_bounds(n)
    with np.errstate(over="ignore"):
        return float(np.exp(lo)), float(np.exp(hi))


def lemma1_lower_bound(T: float, C: float) -> float:
    """Lower bound on the expected load of the C fullest of 2C bins after T uniform balls."""
    if T <= 0 or C <= 0:
        raise ValueError("T and C must be positive")
    return (T / 2 + math.sqrt(C * T / (2 * math.pi))
            - (math.sqrt(2) + 1) * C ** 1.5 / (2 * math.sqrt(2 * math.pi * T))
            - math.sqrt(2 / math.pi) * C ** 2 / T)


def balls_into_bins_loads(T: int, C: int, trials: int, seed: int) -> np.ndarray:
    """Bin loads ``(trials, 2C)``, drawn in fixed shards with one substream each."""
    p = np.full(2 * C, 1.0 / (2 * C))
    shards = []
    for s, start in enumerate(range(0, trials, MC_SHARD)):
        rng = streams.substream(seed, streams.BALLS, s)
        shards.append(rng.multinomial(T, p, size=min(MC_SHARD, trials - start)))
    return np.concatenate(shards)


def top_half_load(loads: np.ndarray, C: int, mode: str = "exact") -> np.ndarray:
    if mode == "exact":
        return np.sort(loads, axis=1)[:, -C:].sum(axis=1)
    if mode == "superbin":
        return loads.reshape(loads.shape[0], C, 2).max(axis=2).sum(axis=1)
    raise ValueError(f"unknown mode {mode!r}")


def balls_into_bins_mc(T: int, C: int, trials: int, seed: int = 0, mode: str = "exact") -> MCEstimate:
    """Monte Carlo estimate of the load in the C fullest of 2C bins.

    ``mode="superbin"`` pairs bins (0,1), (2,3), ... and sums each pair's
    maximum instead, which never exceeds the exact statistic on the same draw.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    _positive("C", C)
    if T < 0:
        raise ValueError("T must be >= 0")
    stat = top_half_load(balls_into_bins_loads(T, C, trials, seed), C, mode).astype(float)
    se = float(stat.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return MCEstimate(float(stat.mean()), se, int(trials), int(seed))


def regret_lower_bound(setting: str, T: int, C: int = 1, d: int = 1, J: int = 1, r: int = 1) -> float:
    """Explicit lower bound on the worst-case expected regret of any online policy.

    ``single`` uses ``r T`` balls into ``2C`` bins; ``elastic`` scales that by
    ``d J``; ``inelastic`` throws T balls into ``2CJ`` bins and scales by ``d``.
    The values may be negative for tiny T.
    """
    _positive("T", T)
    for name, v in (("C", C), ("d", d), ("J", J), ("r", r)):
        _positive(name, v)
    if setting == "theorem1":
        if C != 1 or r != 1:
            raise ValueError("theorem1 bound is for C=1 and one request per slot")
        return mad_lower_bound(T)
    if setting == "single":
        return lemma1_lower_bound(r * T, C) - r * T / 2
    if setting == "elastic":
        return d * J * (lemma1_lower_bound(r * T, C) - r * T / 2)
    if setting == "inelastic":
        if r != 1:
            raise ValueError("inelastic bounds assume one request per user per slot")
        return d * (lemma1_lower_bound(T, J * C) - T / 2)
    raise ValueError(f"unknown setting {setting!r}")


def regret_upper_bound(policy: str, setting: str, T: int, C: int = 1, N: float | None = None,
                       d: int = 1, J: int = 1, r: int = 1) -> float:
    """Regret guarantee of FTPL or OGA with its prescribed parameter."""
    _positive("T", T)
    for name, v in (("C", C), ("d", d), ("J", J), ("r", r)):
        _positive(name, v)
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}")
    if setting in ("theorem1", "single") and (d != 1 or J != 1):
        raise ValueError("single-cache bounds need d = J = 1")
    policy = policy.lower()
    if policy == "oga":
        if setting == "inelastic" and r != 1:
            raise ValueError("inelastic bounds assume one request per user per slot")
        return d * J * math.sqrt(2 * r * C * T)
    if policy == "ftpl":
        if setting == "inelastic":
            raise ValueError("no FTPL regret bound is available for inelastic rewards")
        if r != 1:
            raise ValueError("FTPL bound is stated for one request per slot")
        if N is None or N < 2:
            raise ValueError("FTPL bound needs a library of at least 2 files")
        return FTPL_CONSTANT * math.log(N) ** 0.25 * d * J * math.sqrt(C * T)
    raise ValueError(f"no regret upper bound for policy {policy!r}")


def bound_table(setting: str, T: int, C: int = 1, N: float | None = None, d: int = 1, J: int = 1,
                r: int = 1, policies=("oga", "ftpl")) -> list[BoundReport]:
    """Lower bound plus every applicable upper bound for one setting.

    Upper bounds that do not apply (FTPL without ``N``, FTPL inelastic) are
    skipped; ask :func:`regret_upper_bound` directly to get the error.
    """
    params = dict(T=T, C=C, N=N, d=d, J=J, r=r)
    rows = [BoundReport(f"lower_{setting}", setting, regret_lower_bound(setting, T, C, d, J, r), "lower", params)]
    if setting == "theorem1":
        rows.append(BoundReport("mad_exact", setting, mad_exact(T), "exact", params))
    for p in policies:
        if p == "ftpl" and (N is None or setting == "inelastic" or r != 1):
            continue
        up_setting = "single" if setting == "theorem1" else setting
        n_files = 2 if setting == "theorem1" and N is None else N
        rows.append(BoundReport(f"upper_{p}", setting,
                                regret_upper_bound(p, up_setting, T, C, n_files, d, J, r), "upper", params))
    return rows


def fmt_number(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def write_bound_table(reports, fh) -> None:
    """CSV rows ``name,setting,T,C,N,d,J,r,value,side`` to an open text stream."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(BOUND_FIELDS)
    for rep in reports:
        p = rep.params
        w.writerow([rep.name, rep.setting] + [fmt_number(p.get(k)) for k in ("T", "C", "N", "d", "J", "r")]
                   + [fmt_number(rep.value), rep.side])


__all__ = [
    "BoundReport", "MCEstimate", "mad_exact", "mad_exact_fraction", "mad_lower_bound", "robbins_bounds",
    "robbins_log_bounds", "lemma1_lower_bound", "balls_into_bins_mc", "balls_into_bins_loads",
    "top_half_load", "regret_lower_bound", "regret_upper_bound", "bound_table", "write_bound_table",
]
