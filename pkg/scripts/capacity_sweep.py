"""Average regret at a fixed horizon as the cache size grows, C = round(alpha N).

    python scripts/capacity_sweep.py --alphas 0.005,0.01,0.02,0.05 --T 10000
"""
import argparse
import csv
import sys

from cache_regret.adversary import SequenceSpec
from cache_regret.harness import ExperimentSpec, capacity_sweep


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--alphas", default="0.005,0.01,0.02,0.05")
    p.add_argument("--reward", default="elastic", choices=("elastic", "inelastic"))
    p.add_argument("--T", type=int, default=10_000)
    p.add_argument("--N", type=int, default=3700)
    p.add_argument("--exponent", type=float, default=0.8)
    p.add_argument("--policies", default="lru,lfu,ftpl,oga")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args(argv)

    alphas = [float(a) for a in args.alphas.split(",")]
    base = ExperimentSpec(args.reward, "paper", SequenceSpec("zipf", args.T, exponent=args.exponent),
                          policies=args.policies.split(","), replications=args.reps, base_seed=args.seed,
                          alpha=alphas[0], n_files=args.N, checkpoints=[args.T])
    rows = capacity_sweep(base, alphas)
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
