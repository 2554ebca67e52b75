import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gvlad.errors import DegenerateInputError, EmptyInputError, InvalidArgumentError
from gvlad.kmeans import kmeans, nearest_centroid

from oracles import brute_force_wcss


def test_two_separated_blobs():
    x = np.vstack([np.zeros((100, 2)), np.full((100, 2), 10.0)])
    res = kmeans(x, 2, seed=0)
    got = sorted(map(tuple, res.centroids))
    assert got == [(0.0, 0.0), (10.0, 10.0)]
    assert res.objective == 0.0


def test_single_cluster_is_mean():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(50, 3))
    res = kmeans(x, 1, seed=3)
    np.testing.assert_allclose(res.centroids[0], x.mean(axis=0), atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_objective_never_increases(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(400, 4)) + rng.integers(0, 5, size=(400, 1)) * 3
    res = kmeans(x, 6, seed=seed, restarts=3)
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 1e-9 * h[:-1])


def test_centroids_are_cluster_means():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(300, 2))
    res = kmeans(x, 5, seed=7)
    for j in range(5):
        np.testing.assert_allclose(res.centroids[j], x[res.labels == j].mean(axis=0), atol=1e-12)


def test_seeded_runs_are_identical():
    x = np.random.default_rng(0).normal(size=(200, 5))
    a = kmeans(x, 4, seed=11, restarts=4)
    b = kmeans(x, 4, seed=11, restarts=4)
    assert np.array_equal(a.centroids, b.centroids)
    assert np.array_equal(a.labels, b.labels)


def test_errors():
    with pytest.raises(EmptyInputError):
        kmeans(np.empty((0, 2)), 1)
    with pytest.raises(DegenerateInputError):
        kmeans(np.ones((10, 2)), 2)
    with pytest.raises(InvalidArgumentError):
        kmeans(np.ones((10, 2)), 0)
    with pytest.raises(InvalidArgumentError):
        kmeans(np.array([[np.nan, 0.0]]), 1)


def test_nearest_centroid_ties_go_low():
    c = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 5.0]])
    labels, d2 = nearest_centroid(np.array([[1.0, 0.0]]), c)
    assert labels[0] == 0 and d2[0] == 1.0


def test_nearest_centroid_matches_exhaustive():
    rng = np.random.default_rng(5)
    x = rng.integers(-3, 4, size=(500, 3)).astype(float)
    c = rng.integers(-3, 4, size=(7, 3)).astype(float)
    labels, d2 = nearest_centroid(x, c)
    for i in range(len(x)):
        dists = [float(((x[i] - cj) ** 2).sum()) for cj in c]
        m = min(dists)
        assert labels[i] == dists.index(m)
        assert d2[i] == m


points = st.lists(
    st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=3, max_size=7, unique=True
)


@settings(max_examples=40, deadline=None)
@given(points, st.integers(1, 3))
def test_matches_brute_force_optimum(pts, k):
    x = np.array(pts, dtype=float)
    best, _ = brute_force_wcss(x, k)
    res = kmeans(x, k, seed=0, restarts=10)
    assert abs(res.objective - best) <= 1e-9 * max(1.0, best)


def test_exchange_refinement_escapes_lloyd_fixed_point():
    # every k-means++ seeding of these 5 points converges (under Lloyd alone) to WCSS 26
    x = np.array([(0, 4, 1), (2, 0, -3), (2, 0, -4), (-2, -4, -1), (4, -2, 2)], float)
    best, _ = brute_force_wcss(x, 3)
    assert best == 25.0
    assert kmeans(x, 3, seed=0, refine=False, swap=False).objective == 26.0
    assert kmeans(x, 3, seed=0, swap=False).objective == 25.0


def test_swap_search_escapes_exchange_stable_partition():
    # k-means++ keeps isolating the outlier (3, 4, -3); that split is stable
    # under single-point moves but the optimum splits the other six points
    x = np.array([(-1, -2, -1), (2, -1, 1), (3, 4, -3), (-1, 1, 0),
                  (-1, -1, -3), (2, 0, -2), (-2, -4, -2)], float)
    best, _ = brute_force_wcss(x, 2)
    assert kmeans(x, 2, seed=0, swap=False).objective == 40.5
    res = kmeans(x, 2, seed=0)
    assert abs(res.objective - best) <= 1e-9
    assert 2 <= np.bincount(res.labels).min()


def test_swap_is_deterministic_and_skipped_for_large_inputs(rng):
    x = rng.normal(size=(40, 2))
    a, b = kmeans(x, 3, seed=5), kmeans(x, 3, seed=5)
    assert a.centroids.tobytes() == b.centroids.tobytes()
    big = rng.normal(size=(300, 2))
    assert kmeans(big, 3, seed=1).objective == kmeans(big, 3, seed=1, swap=False).objective
