import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depthmotion.errors import ContractViolation
from depthmotion.kmeans import _kmeanspp, kmeans_1d, kmeans_depth, lloyd, optimal_partition
from depthmotion.pipeline import DepthMap


def brute_force_inertia(x, k):
    """Minimum within-cluster sum of squares over every labelling of the points."""
    x = np.asarray(x, float)
    best = np.inf
    for labels in itertools.product(range(k), repeat=x.size):
        if labels[0] != 0 or len(set(labels)) != k:
            continue
        lab = np.array(labels)
        cost = sum(((x[lab == j] - x[lab == j].mean()) ** 2).sum() for j in range(k))
        best = min(best, cost)
    return best


def test_uniform_map_single_cluster():
    assert kmeans_depth(DepthMap(np.full((16, 16), 20.0), 0.0), 1) == [20.0]


def test_two_clear_clusters():
    x = [10, 10, 10, 40, 40, 40]
    assert brute_force_inertia(x, 2) == 0.0
    assert kmeans_1d(x, 2).centroids.tolist() == [10.0, 40.0]


def test_collapse_when_too_few_values():
    assert kmeans_depth(np.array([[5.0, 5.0], [9.0, 9.0]]), 3) == [5.0, 9.0]


def test_invalid_inputs():
    with pytest.raises(ContractViolation):
        kmeans_1d([1.0], 0)
    with pytest.raises(ContractViolation):
        kmeans_1d([], 1)


@given(st.lists(st.floats(0.1, 100.0), min_size=1, max_size=40), st.integers(1, 4), st.integers(0, 1000))
@settings(max_examples=100, deadline=None)
def test_lloyd_properties(values, k, seed):
    x = np.array(values)
    result = kmeans_1d(x, k, seed=seed)
    c = result.centroids
    assert np.all(np.diff(c) > 0)
    assert c.min() >= x.min() - 1e-9 and c.max() <= x.max() + 1e-9
    h = np.array(result.inertia_history)
    assert np.all(np.diff(h) <= 1e-9 * max(1.0, h[0]))


def test_empty_cluster_is_reseeded():
    x = np.array([0.0, 1.0, 2.0, 100.0])
    res = lloyd(x, np.array([1.0, 500.0, 600.0]))
    assert res.centroids.size == 3
    assert 100.0 in res.centroids


def test_kmeanspp_distinct_seeds():
    rng = np.random.default_rng(0)
    c = _kmeanspp(np.array([1.0, 1.0, 2.0, 3.0]), 3, rng)
    assert len(set(c.tolist())) == 3


def test_subsampling_keeps_scale():
    rng = np.random.default_rng(1)
    depth = np.where(rng.random((256, 256)) < 0.5, 10.0, 80.0) + rng.normal(0, 0.5, (256, 256))
    sub = kmeans_depth(depth, 2, max_samples=4096)
    full = kmeans_depth(depth, 2, max_samples=None)
    assert np.allclose(sub, [10.0, 80.0], atol=0.5)
    assert np.allclose(sub, full, atol=0.2)


@given(st.lists(st.integers(0, 20), min_size=2, max_size=9))
@settings(max_examples=60, deadline=None)
def test_best_of_restarts_matches_brute_force(values):
    x = np.array(values, float)
    k = min(2, np.unique(x).size)
    got = kmeans_1d(x, 2, seed=3, n_init=10).inertia
    assert got == pytest.approx(brute_force_inertia(x, k), abs=1e-9)


def test_exact_partition_matches_enumeration_for_three_and_four_clusters():
    rng = np.random.default_rng(11)
    for _ in range(60):
        m = int(rng.integers(4, 9))
        x = np.round(rng.normal(0, 5, m), 1)
        k = min(int(rng.integers(3, 5)), np.unique(x).size)
        best = np.inf
        for lab in itertools.product(range(k), repeat=m):
            lab = np.array(lab)
            if np.unique(lab).size == k:
                best = min(best, sum(((x[lab == j] - x[lab == j].mean()) ** 2).sum() for j in range(k)))
        c = optimal_partition(np.sort(x), k)
        got = ((x - c[np.abs(x[:, None] - c).argmin(1)]) ** 2).sum()
        assert got == pytest.approx(best, abs=1e-9)


def test_lloyd_alone_can_stall_where_exact_start_does_not():
    x = np.array([82.5031029, 0.6782291, 1.59133938, 52.03147604, 29.70697122, 40.15518017, 53.65983902])
    stalled = lloyd(x, np.array([1.0, 50.0]))
    assert kmeans_1d(x, 2, n_init=1).inertia < stalled.inertia - 1.0
