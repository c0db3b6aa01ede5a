"""Regret of online caching policies: single caches and bipartite cache networks."""

from .adversary import SequenceSpec, alternating_sequence, identical_users_sequence, uniform_support_sequence
from .bounds import (balls_into_bins_mc, lemma1_lower_bound, mad_exact, mad_lower_bound, regret_lower_bound,
                     regret_upper_bound, robbins_bounds)
from .geometry import gradient_norm_bound, project_capped_simplex, supergradient
from .harness import ExperimentSpec, capacity_sweep, emit_results, read_results, run_experiment, summarize
from .hindsight import hindsight, static_opt_elastic, static_opt_inelastic, static_opt_single
from .model import (BipartiteTopology, CacheConfig, Catalog, RequestBatch, RequestSequence, RunResult,
                    build_topology, paper_topology_preset, single_topology)
from .policies import FIFO, FTPL, LFU, LRU, OGA, StaticFixed, default_eta, ftpl_network, make_policy
from .rewards import cumulative_reward, one_slot_reward
from .trace import load_trace, partition_blocks, zipf_sequence

__version__ = "0.1.0"
