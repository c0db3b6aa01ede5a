import numpy as np
import pytest
from conftest import grid_projection
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cache_regret.geometry import (diameter_bound, gradient_norm_bound, project_capped_simplex,
                                   project_capped_simplex_batch, supergradient)
from cache_regret.model import build_topology, is_feasible, paper_topology_preset, single_topology
from cache_regret.rewards import one_slot_reward

finite = st.floats(-3, 3, allow_nan=False)


def test_feasible_input_returned_unchanged():
    res = project_capped_simplex([0.3, 0.2], 1)
    np.testing.assert_array_equal(res.projected, [0.3, 0.2])
    assert res.multiplier == 0.0


def test_projection_shift_example():
    res = project_capped_simplex([1.5, 0.9], 1)
    np.testing.assert_allclose(res.projected, [0.8, 0.2], atol=1e-12)
    assert res.multiplier == pytest.approx(0.7)
    np.testing.assert_allclose(grid_projection(np.array([1.5, 0.9]), 1), [0.8, 0.2], atol=1e-9)


def test_projection_variational_inequality():
    v = np.array([2.0, -1.0])
    y = project_capped_simplex(v, 1).projected
    np.testing.assert_allclose(y, [1.0, 0.0])
    axis = np.linspace(0, 1, 101)
    grid = np.array([(a, b) for a in axis for b in axis if a + b <= 1])
    assert np.all((grid - y) @ (v - y) <= 1e-12)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        project_capped_simplex([np.inf, 0.0], 1)
    with pytest.raises(ValueError):
        project_capped_simplex_batch(np.array([[np.nan, 0.0]]), 1)


@pytest.mark.parametrize("method", ["sort", "bisect"])
@given(v=arrays(float, st.integers(2, 30), elements=finite), C=st.integers(1, 5))
def test_projection_feasible_and_idempotent(method, v, C):
    y = project_capped_simplex(v, C, method=method).projected
    assert is_feasible(y, C)
    np.testing.assert_array_equal(project_capped_simplex(y, C, method=method).projected, y)


@given(v=arrays(float, st.integers(2, 30), elements=finite), C=st.integers(1, 5))
def test_sort_and_bisect_agree(v, C):
    a = project_capped_simplex(v, C, method="sort").projected
    b = project_capped_simplex(v, C, method="bisect").projected
    np.testing.assert_allclose(a, b, atol=1e-9)


@given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 2**31))
def test_non_expansive(n, C, seed):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, n)) * 2
    pu = project_capped_simplex(u, C).projected
    pv = project_capped_simplex(v, C).projected
    assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) + 1e-9


@pytest.mark.parametrize("n", [5, 64, 200, 3700])
def test_batch_matches_kkt_conditions(n):
    # at the optimum, free coordinates share one shift and clipped ones sit on the right side of it
    rng = np.random.default_rng(n)
    V = rng.normal(size=(8, n)) * 0.5 + 0.3
    Y, tau = project_capped_simplex_batch(V, 3)
    for v, y, t in zip(V, Y, tau):
        assert is_feasible(y, 3)
        free = (y > 1e-12) & (y < 1 - 1e-12)
        np.testing.assert_allclose(v[free] - y[free], t, atol=1e-9)
        assert np.all(v[y <= 1e-12] <= t + 1e-9)
        assert np.all(v[y >= 1 - 1e-12] >= 1 + t - 1e-9)
        if t > 0:
            assert y.sum() == pytest.approx(3, abs=1e-9)


def test_single_gradient_is_request():
    top = single_topology()
    x = np.zeros((1, 4))
    x[0, 2] = 1
    np.testing.assert_array_equal(supergradient("single", top, x, np.zeros((1, 4))), x)


def test_elastic_gradient_sums_in_neighbours():
    top = build_topology(2, 1, [(0, 0), (1, 0)])
    x = np.zeros((2, 3))
    x[:, 1] = 1
    g = supergradient("elastic", top, x, np.zeros((1, 3)))
    assert g[0, 1] == 2


def test_masked_inelastic_gradient_zero_above_cap():
    top = build_topology(1, 2, [(0, 0), (0, 1)])
    x = np.array([[1.0, 0.0]])
    y = np.array([[0.6, 0.0], [0.6, 0.0]])
    g = supergradient("inelastic", top, x, y)
    np.testing.assert_array_equal(g[:, 0], [0.0, 0.0])
    # central finite differences confirm zero slope in every cache's coordinate
    h = 1e-6
    for j in range(2):
        up, down = y.copy(), y.copy()
        up[j, 0] += h
        down[j, 0] -= h
        slope = (one_slot_reward("inelastic", top, x, up) - one_slot_reward("inelastic", top, x, down)) / (2 * h)
        assert slope == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_array_equal(supergradient("inelastic", top, x, y, mode="paper")[:, 0], [1.0, 1.0])


def _random_state(rng, top, N, C):
    x = np.zeros((top.n_users, N))
    x[np.arange(top.n_users), rng.integers(0, N, top.n_users)] = 1
    ys = []
    for _ in range(2):
        y, _ = project_capped_simplex_batch(rng.random((top.n_caches, N)) * 1.5, C)
        ys.append(y)
    return x, ys[0], ys[1]


def test_masked_supergradient_inequality():
    top = build_topology(3, 2, [(0, 0), (0, 1), (1, 0), (1, 1), (2, 1)])
    rng = np.random.default_rng(1)
    for _ in range(500):
        x, y, z = _random_state(rng, top, 4, 2)
        g = supergradient("inelastic", top, x, y)
        lhs = one_slot_reward("inelastic", top, x, z)
        rhs = one_slot_reward("inelastic", top, x, y) + (g * (z - y)).sum()
        assert lhs <= rhs + 1e-9


def test_unmasked_mode_can_violate_supergradient_inequality():
    top = build_topology(1, 2, [(0, 0), (0, 1)])
    x = np.array([[1.0, 0.0]])
    y = np.array([[1.0, 0.0], [1.0, 0.0]])
    z = np.zeros((2, 2))
    g = supergradient("inelastic", top, x, y, mode="paper")
    lhs = one_slot_reward("inelastic", top, x, z)
    rhs = one_slot_reward("inelastic", top, x, y) + (g * (z - y)).sum()
    assert lhs > rhs  # 0 > 1 - 2


def test_gradient_mode_validation():
    top = single_topology()
    with pytest.raises(ValueError):
        supergradient("inelastic", top, np.zeros((1, 2)), np.zeros((1, 2)), mode="bogus")
    with pytest.raises(ValueError):
        supergradient("elastic", top, np.zeros((2, 2)), np.zeros((1, 2)))


@pytest.mark.parametrize("d,J,r,expected", [(1, 1, 1, 1.0), (3, 4, 1, 6.0), (2, 2, 2, 4.0)])
def test_gradient_norm_bound_values(d, J, r, expected):
    edges = [(u, j) for j in range(J) for u in range(d)]
    top = build_topology(d, J, edges)
    assert gradient_norm_bound(top, r) == pytest.approx(expected)


def test_gradient_norm_bound_requires_regular():
    with pytest.raises(ValueError):
        gradient_norm_bound(build_topology(2, 2, [(0, 0), (1, 0), (1, 1)]))


def test_gradient_norm_below_bound_on_random_batches():
    # one request per user; with several requests per slot a repeated file can exceed d sqrt(rJ)
    top = paper_topology_preset()
    rng = np.random.default_rng(3)
    bound = gradient_norm_bound(top, 1)
    for _ in range(300):
        x, y, _ = _random_state(rng, top, 6, 2)
        for kind in ("elastic", "inelastic"):
            assert np.linalg.norm(supergradient(kind, top, x, y)) <= bound + 1e-12


def test_diameter_bound_dominates_pairs():
    rng = np.random.default_rng(4)
    J, N, C = 3, 7, 2
    for _ in range(200):
        a, _ = project_capped_simplex_batch(rng.random((J, N)) * 2, C)
        b, _ = project_capped_simplex_batch(rng.random((J, N)) * 2, C)
        assert np.linalg.norm(a - b) <= diameter_bound(J, C) + 1e-12
