"""Average regret over time for every policy on a Zipf workload in the cache network.

    python scripts/compare_policies.py --T 20000 --out results/compare.csv
"""
import argparse
import sys

from cache_regret.adversary import SequenceSpec
from cache_regret.harness import ExperimentSpec, emit_results, meta_line, run_experiment, summarize


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--reward", default="elastic", choices=("elastic", "inelastic"))
    p.add_argument("--T", type=int, default=20_000)
    p.add_argument("--N", type=int, default=3700)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--exponent", type=float, default=0.8)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="write the full regret table here")
    args = p.parse_args(argv)

    spec = ExperimentSpec(args.reward, "paper", SequenceSpec("zipf", args.T, exponent=args.exponent),
                          policies=["lru", "lfu", "fifo", "ftpl", "oga"], replications=args.reps,
                          base_seed=args.seed, alpha=args.alpha, n_files=args.N, jobs=args.jobs)
    results = run_experiment(spec)
    N, C = spec.library()
    print(f"N={N} C={C} T={args.T} reward={args.reward}")
    for name, s in summarize(results).items():
        print(f"{name:>5}  avg regret {s.avg_regret:.5f}  (se {s.std_error / s.T:.5f})")
    if args.out:
        emit_results(results, args.out, meta=meta_line(script="compare_policies", N=N, C=C, T=args.T))
    return 0


if __name__ == "__main__":
    sys.exit(main())
