import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cache_regret.hindsight import (brute_force_uncoded, hindsight, orthogonal_config, static_opt_elastic,
                                    static_opt_inelastic, static_opt_single)
from cache_regret.model import RequestSequence, build_topology, paper_topology_preset, single_topology
from cache_regret.rewards import cumulative_reward, static_reward


def test_single_top_c_examples():
    s = static_opt_single(np.array([5, 3, 2]), 1)
    np.testing.assert_array_equal(s.configs, [[1, 0, 0]])
    assert s.reward == 5 and s.certified_exact
    assert static_opt_single(np.array([5, 3, 2]), 2).reward == 8
    assert static_opt_single(np.array([1, 2, 2]), 1).configs[0, 1] == 1  # lowest id on ties
    with pytest.raises(ValueError):
        static_opt_single(np.array([-1, 2]), 1)


def test_elastic_reduces_to_single():
    counts = np.array([[4.0, 1.0, 6.0, 2.0]])
    e = static_opt_elastic(single_topology(), counts, 2)
    s = static_opt_single(counts[0], 2)
    np.testing.assert_array_equal(e.configs, s.configs)
    assert e.reward == s.reward


def test_identical_neighbourhoods_identical_configs():
    top = build_topology(2, 2, [(0, 0), (1, 0), (0, 1), (1, 1)])
    counts = np.random.default_rng(0).integers(0, 9, (2, 6)).astype(float)
    y = static_opt_elastic(top, counts, 2).configs
    np.testing.assert_array_equal(y[0], y[1])


def test_preset_elastic_reward_recomputed():
    top = paper_topology_preset()
    rng = np.random.default_rng(1)
    seq = RequestSequence(rng.integers(0, 8, (40, 10)), 8)
    sol = static_opt_elastic(top, seq, 2)
    assert sol.reward == pytest.approx(cumulative_reward("elastic", top, list(seq), [sol.configs] * 40))
    agg = top.aggregate(seq.counts())
    for j in range(4):
        assert sol.configs[j].sum() == 2
        assert agg[j][sol.configs[j] == 1].min() >= agg[j][sol.configs[j] == 0].max()


def test_inelastic_single_reduces_to_single():
    seq = RequestSequence(np.random.default_rng(2).integers(0, 5, 30), 5)
    a = static_opt_inelastic(single_topology(), seq, 2)
    assert a.reward == pytest.approx(static_opt_single(seq.counts()[0], 2).reward)
    assert not a.certified_exact


def test_inelastic_double_copy_capped():
    top = build_topology(1, 2, [(0, 0), (0, 1)])
    seq = RequestSequence(np.zeros(7, dtype=int), 3)
    sol = static_opt_inelastic(top, seq, 1, mode="brute_force")
    assert sol.reward == pytest.approx(7)
    assert sol.uncoded_reward == pytest.approx(7)
    assert sol.certified_exact
    both = np.array([[1.0, 0, 0], [1.0, 0, 0]])
    assert static_reward("inelastic", top, seq.counts(), both) == 7


def test_inelastic_rejects_multi_request_and_large_brute_force():
    top = single_topology()
    with pytest.raises(ValueError):
        static_opt_inelastic(top, RequestSequence(np.zeros((3, 1, 2), dtype=int), 2), 1)
    with pytest.raises(ValueError):
        static_opt_inelastic(top, np.ones((1, 7)), 1, mode="brute_force")


def test_orthogonal_config_disjoint():
    top = paper_topology_preset()
    counts = np.random.default_rng(3).integers(0, 20, (10, 30)).astype(float)
    y = orthogonal_config(top, counts, 3)
    assert np.all(y.sum(axis=0) <= 1)
    assert np.all(y.sum(axis=1) == 3)
    assert static_reward("inelastic", top, counts, y) == pytest.approx(static_reward("elastic", top, counts, y))


def test_ascent_history_monotone_and_feasible():
    top = paper_topology_preset()
    counts = np.random.default_rng(4).integers(0, 5, (10, 12)).astype(float)
    sol = static_opt_inelastic(top, counts, 2, budget=300)
    assert np.all(np.diff(sol.history) >= 0)
    assert np.all(sol.configs >= -1e-12) and np.all(sol.configs <= 1 + 1e-12)
    assert np.all(sol.configs.sum(axis=1) <= 2 + 1e-9)
    assert sol.reward == pytest.approx(static_reward("inelastic", top, counts, sol.configs))


@given(st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_hindsight_beats_random_uncoded(seed):
    rng = np.random.default_rng(seed)
    top = paper_topology_preset()
    counts = rng.integers(0, 4, (10, 8)).astype(float)
    for kind in ("elastic", "inelastic"):
        best = hindsight(kind, top, counts, 2, budget=200).reward if kind == "inelastic" else \
            hindsight(kind, top, counts, 2).reward
        z = np.zeros((4, 8))
        for j in range(4):
            z[j, rng.choice(8, 2, replace=False)] = 1
        assert best >= static_reward(kind, top, counts, z) - 1e-9


def test_brute_force_matches_enumeration():
    top = build_topology(2, 2, [(0, 0), (1, 0), (1, 1)])
    counts = np.array([[3.0, 1, 0, 2], [0, 2, 2, 1]])
    y, v = brute_force_uncoded(top, counts, 1)
    vals = []
    for a, b in itertools.product(range(4), repeat=2):
        z = np.zeros((2, 4))
        z[0, a] = z[1, b] = 1
        vals.append(static_reward("inelastic", top, counts, z))
    assert v == max(vals)


def test_dispatch_errors():
    with pytest.raises(ValueError):
        hindsight("single", paper_topology_preset(), np.zeros((10, 3)), 1)
    with pytest.raises(ValueError):
        hindsight("nope", single_topology(), np.zeros((1, 3)), 1)
