import numpy as np
import pytest

from toxiscope.exceptions import InputError
from toxiscope.topics import _update_centroids, kmeans, kmeans_objective


def test_single_cluster_is_the_mean():
    points = np.random.default_rng(0).normal(size=(25, 3))
    result = kmeans(points, 1, seed=4)

    assert set(result.assignments) == {0}
    np.testing.assert_allclose(result.centroids[0], points.mean(axis=0), atol=1e-9)


def test_separated_blobs_split_exactly():
    points = np.array([[0.0, 0.0]] * 3 + [[10.0, 10.0]] * 3)
    result = kmeans(points, 2, seed=0)

    assert len(set(result.assignments[:3])) == 1
    assert len(set(result.assignments[3:])) == 1
    assert result.assignments[0] != result.assignments[3]
    assert sorted(map(tuple, result.centroids)) == [(0.0, 0.0), (10.0, 10.0)]


def test_objective_is_non_increasing():
    points = np.random.default_rng(7).normal(size=(40, 3))
    result = kmeans(points, 4, seed=1)

    history = result.objective_history
    assert all(later <= earlier + 1e-12 for earlier, later in zip(history, history[1:]))
    assert result.objective <= history[0]

    direct = sum(((point - result.centroids[cluster]) ** 2).sum() for point, cluster in zip(points, result.assignments))
    assert result.objective == pytest.approx(direct, abs=1e-9)


def test_same_seed_same_result():
    points = np.random.default_rng(11).normal(size=(60, 5))
    first = kmeans(points, 6, seed=3)
    second = kmeans(points, 6, seed=3)

    np.testing.assert_array_equal(first.assignments, second.assignments)
    np.testing.assert_array_equal(first.centroids, second.centroids)


def test_every_point_assigned():
    points = np.random.default_rng(12).normal(size=(50, 2))
    result = kmeans(points, 5, seed=0)

    assert len(result.assignments) == 50
    assert np.bincount(result.assignments, minlength=5).sum() == 50
    assert result.assignments.min() >= 0 and result.assignments.max() < 5


def test_k_equals_n():
    points = np.arange(8, dtype=float).reshape(4, 2)
    result = kmeans(points, 4, seed=0)

    assert sorted(result.assignments.tolist()) == [0, 1, 2, 3]
    assert result.objective == 0


def test_max_iterations_caps_updates():
    points = np.random.default_rng(3).normal(size=(100, 2))
    result = kmeans(points, 8, seed=0, max_iterations=1)

    assert result.iterations == 1
    assert len(result.objective_history) == 1


def test_empty_cluster_is_reseeded():
    points = np.array([[0.0], [1.0], [2.0], [11.0]])
    assignments = np.array([0, 0, 0, 0])
    centroids = np.array([[0.0], [100.0]])

    updated = _update_centroids(points, assignments, centroids, 2)

    assert assignments.tolist() == [0, 0, 0, 1]
    assert updated[1, 0] == 11.0
    assert updated[0, 0] == pytest.approx(1.0)
    assert kmeans_objective(points, assignments, updated) < kmeans_objective(points, np.zeros(4, dtype=int), centroids)


@pytest.mark.parametrize("k", [0, -1, 5])
def test_invalid_k(k):
    with pytest.raises(InputError):
        kmeans(np.zeros((4, 2)), k, seed=0)


def test_invalid_max_iterations():
    with pytest.raises(InputError, match="max_iterations"):
        kmeans(np.zeros((4, 2)), 2, seed=0, max_iterations=0)
