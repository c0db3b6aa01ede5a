"""Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 usage error."""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
from pathlib import Path

from . import bounds as B
from .adversary import SequenceSpec
from .harness import ExperimentSpec, emit_results, meta_line, run_experiment
from .model import REWARD_KINDS, RequestSequence
from .policies import POLICY_NAMES
from .trace import TRACE_FORMATS, TraceParseError, export_sequence, load_trace, partition_blocks

JOBS_ENV = "CACHE_REGRET_JOBS"


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _default_jobs():
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=_positive_int, default=_default_jobs(),
                   help=f"parallel workers (default ${JOBS_ENV} or 1)")
    p.add_argument("--no-header-meta", action="store_true", help="omit the timestamped '#' header line")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="cache-regret", description="Online caching regret experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run policies and write the regret table")
    s.add_argument("--reward", choices=REWARD_KINDS, required=True)
    s.add_argument("--topology", default="single", help="single, paper or file:PATH")
    s.add_argument("--policies", default="ftpl", help=f"comma list from {','.join(POLICY_NAMES)}")
    s.add_argument("--sequence", required=True, help="uniform2c, identical, alternating, zipf:EXP or trace:PATH")
    s.add_argument("--T", type=_positive_int, required=True)
    cap = s.add_mutually_exclusive_group(required=True)
    cap.add_argument("--C", type=_positive_int)
    cap.add_argument("--alpha", type=float)
    s.add_argument("--N", type=_positive_int, help="library size (default depends on the sequence)")
    s.add_argument("--r", type=_positive_int, default=1, help="requests per user per slot")
    s.add_argument("--reps", type=_positive_int, default=1)
    s.add_argument("--checkpoints", type=_positive_int, default=50, help="number of log-spaced checkpoints")
    s.add_argument("--inelastic-budget", type=_positive_int, default=2000)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", parents=[common], help="evaluate regret bounds")
    b.add_argument("--setting", required=True,
                   help="theorem1, single, elastic, inelastic, or POLICY-SETTING for one upper bound")
    b.add_argument("--T", type=_positive_int, required=True)
    b.add_argument("--C", type=_positive_int, default=1)
    b.add_argument("--N", type=float)
    b.add_argument("--d", type=_positive_int, default=1)
    b.add_argument("--J", type=_positive_int, default=1)
    b.add_argument("--r", type=_positive_int, default=1)
    b.set_defaults(func=cmd_bounds)

    m = sub.add_parser("ballsbins", parents=[common], help="Monte Carlo of the C fullest of 2C bins")
    m.add_argument("--T", type=int, required=True)
    m.add_argument("--C", type=_positive_int, required=True)
    m.add_argument("--trials", type=_positive_int, required=True)
    m.add_argument("--mode", choices=("exact", "superbin"), default="exact")
    m.set_defaults(func=cmd_ballsbins)

    d = sub.add_parser("mad", parents=[common], help="exact binomial mean deviation against its lower bound")
    d.add_argument("--Tmax", type=_positive_int, required=True)
    d.set_defaults(func=cmd_mad)

    for name in ("trace-convert", "trace_convert"):
        t = sub.add_parser(name, parents=[common], help="partition a trace into per-user streams"
                           if name == "trace-convert" else argparse.SUPPRESS)
        t.add_argument("--in", dest="inp", required=True)
        t.add_argument("--in-format", choices=TRACE_FORMATS, default="csv")
        t.add_argument("--users", type=_positive_int, required=True)
        t.add_argument("--T", type=_positive_int, help="keep only the first T slots")
        t.set_defaults(func=cmd_trace_convert)
    return parser


@contextlib.contextmanager
def _output(path):
    if path == "-":
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        yield fh


def _meta(args, **info):
    return None if args.no_header_meta else meta_line(command=args.command, seed=args.seed, **info)


def _write_rows(args, header, rows, **info):
    with _output(args.out) as fh:
        if args.format == "json":
            json.dump({"columns": list(header), "rows": [dict(zip(header, r)) for r in rows]}, fh, indent=1)
            fh.write("\n")
            return
        meta = _meta(args, **info)
        if meta:
            fh.write(meta + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([B.fmt_number(v) if not isinstance(v, str) else v for v in r])


def _sequence_spec(args) -> SequenceSpec:
    text = args.sequence
    if text == "uniform2c":
        return SequenceSpec("uniform_support", args.T, r=args.r, seed=args.seed)
    if text == "identical":
        return SequenceSpec("identical_users", args.T, r=args.r, seed=args.seed)
    if text == "alternating":
        return SequenceSpec("alternating", args.T, r=args.r, seed=args.seed)
    if text.startswith("zipf:"):
        try:
            exponent = float(text[5:])
        except ValueError:
            raise UsageError(f"bad Zipf exponent in {text!r}") from None
        if exponent < 0:
            raise UsageError("Zipf exponent must be >= 0")
        return SequenceSpec("zipf", args.T, r=args.r, seed=args.seed, exponent=exponent)
    if text.startswith("trace:"):
        return SequenceSpec("trace", args.T, r=args.r, seed=args.seed, path=text[6:])
    raise UsageError(f"unknown sequence {text!r}")


def cmd_simulate(args) -> int:
    policies = [p.strip().lower() for p in args.policies.split(",") if p.strip()]
    bad = [p for p in policies if p not in POLICY_NAMES]
    if bad or not policies:
        raise UsageError(f"unknown policies {bad}; choose from {','.join(POLICY_NAMES)}")
    if args.alpha is not None and not 0 < args.alpha <= 1:
        raise UsageError("--alpha must lie in (0, 1]")
    if args.topology not in ("single", "paper") and not args.topology.startswith("file:"):
        raise UsageError(f"unknown topology {args.topology!r}")
    if args.reward == "single" and args.topology != "single":
        raise UsageError("--reward single needs --topology single")
    if args.reward == "inelastic" and args.r != 1:
        raise UsageError("--reward inelastic needs --r 1")
    if args.alpha is not None and args.N is None and args.sequence in ("uniform2c", "identical"):
        raise UsageError("--alpha with this sequence needs --N")
    seq = _sequence_spec(args)
    spec = ExperimentSpec(args.reward, args.topology, seq, policies=policies, T=args.T,
                          replications=args.reps, base_seed=args.seed, capacity=args.C, alpha=args.alpha,
                          n_files=args.N, checkpoints=args.checkpoints,
                          inelastic_budget=args.inelastic_budget, jobs=args.jobs)
    results = run_experiment(spec)
    N, C = spec.library()
    meta = _meta(args, reward=args.reward, N=N, C=C, T=args.T)
    with _output(args.out) as fh:
        emit_results(results, fh, args.format, meta=meta)
    return 0


def cmd_bounds(args) -> int:
    setting = args.setting
    try:
        if setting in B.SETTINGS:
            reports = B.bound_table(setting, args.T, args.C, args.N, args.d, args.J, args.r)
        elif "-" in setting:
            policy, _, base = setting.partition("-")
            value = B.regret_upper_bound(policy, base, args.T, args.C, args.N, args.d, args.J, args.r)
            params = dict(T=args.T, C=args.C, N=args.N, d=args.d, J=args.J, r=args.r)
            reports = [B.BoundReport(f"upper_{policy}", base, value, "upper", params)]
        else:
            raise ValueError(f"unknown setting {setting!r}")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = []
    for rep in reports:
        p = rep.params
        rows.append([rep.name, rep.setting] + [p.get(k) for k in ("T", "C", "N", "d", "J", "r")] + [rep.value, rep.side])
    _write_rows(args, B.BOUND_FIELDS, rows)
    return 0


def cmd_ballsbins(args) -> int:
    if args.T < 0:
        raise UsageError("--T must be >= 0")
    est = B.balls_into_bins_mc(args.T, args.C, args.trials, args.seed, args.mode)
    bound = B.lemma1_lower_bound(args.T, args.C) if args.T > 0 else 0.0
    ok = est.mean >= bound - 3 * est.std_error
    header = ("mode", "T", "C", "trials", "seed", "mean", "std_error", "lemma1_bound", "pass")
    _write_rows(args, header, [[args.mode, args.T, args.C, est.trials, est.seed, est.mean, est.std_error,
                                bound, "pass" if ok else "fail"]])
    return 0


def cmd_mad(args) -> int:
    rows = []
    for T in range(1, args.Tmax + 1):
        exact, lower = B.mad_exact(T), B.mad_lower_bound(T)
        rows.append([T, exact, lower, exact - lower])
    _write_rows(args, ("T", "mad_exact", "mad_lower_bound", "margin"), rows)
    return 0


def cmd_trace_convert(args) -> int:
    catalog, events = load_trace(args.inp, args.in_format)
    try:
        blocks = partition_blocks(events, args.users)
    except ValueError as exc:
        raise RuntimeError(str(exc)) from None
    if args.T is not None:
        if args.T > blocks.shape[0]:
            raise RuntimeError(f"trace blocks hold {blocks.shape[0]} slots, fewer than --T {args.T}")
        blocks = blocks[: args.T]
    seq = RequestSequence(blocks[:, :, None], catalog.n_files)
    with _output(args.out) as fh:
        export_sequence(seq, fh)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on malformed flags
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except TraceParseError as exc:
        print(f"{parser.prog} {args.command}: parse error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"{parser.prog} {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
