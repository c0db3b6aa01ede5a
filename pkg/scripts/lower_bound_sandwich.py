"""Single-cache regret of every policy against the lower and upper bounds.

The adversary draws uniformly from 2C files, which is the instance the lower
bound is computed for.

    python scripts/lower_bound_sandwich.py --C 1 --T 10000 --reps 200
"""
import argparse
import sys

import numpy as np

from cache_regret.adversary import SequenceSpec
from cache_regret.bounds import regret_lower_bound, regret_upper_bound
from cache_regret.harness import ExperimentSpec, run_experiment, summarize


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--C", type=int, default=1)
    p.add_argument("--T", type=int, default=10_000)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    C, T = args.C, args.T
    fixed = np.zeros((1, 2 * C))
    fixed[0, :C] = 1
    spec = ExperimentSpec("single", "single", SequenceSpec("uniform_support", T), capacity=C,
                          policies=["lru", "lfu", "fifo", "ftpl", "oga", ("static", {"configs": fixed})],
                          replications=args.reps, base_seed=args.seed, checkpoints=[T])
    lower = regret_lower_bound("single", T, C)
    print(f"lower bound {lower:.3f}   oga upper bound {regret_upper_bound('oga', 'single', T, C):.3f}   "
          f"ftpl upper bound {regret_upper_bound('ftpl', 'single', T, C, N=2 * C):.3f}")
    for name, s in summarize(run_experiment(spec)).items():
        print(f"{name:>6}  mean regret {s.mean_regret:9.3f}  se {s.std_error:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
