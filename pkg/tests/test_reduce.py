import numpy as np
import pytest

from toxiscope.exceptions import InputError
from toxiscope.topics import EmbeddingMatrix, PcaReducer, reduce


def _pairwise(points):
    return np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)


def test_line_is_reconstructed_exactly():
    direction = np.array([1.0, 2.0, -2.0]) / 3
    points = np.outer(np.arange(-4, 6, dtype=float), direction) + np.array([1.0, 1.0, 1.0])

    reducer = PcaReducer()
    projected = reducer.fit_transform(points, 1, seed=0)
    rebuilt = projected @ reducer.components + reducer.mean

    np.testing.assert_allclose(rebuilt, points, atol=1e-9)


def test_full_dimension_preserves_distances():
    points = np.random.default_rng(1).normal(size=(12, 4))
    projected = reduce(points, 4, seed=3)

    np.testing.assert_allclose(_pairwise(projected), _pairwise(points), atol=1e-9)


def test_variance_matches_eigendecomposition():
    points = np.random.default_rng(5).normal(size=(20, 10)) * np.arange(1, 11)
    projected = reduce(points, 3, seed=0)

    covariance = np.cov(points, rowvar=False)
    top = np.sort(np.linalg.eigvalsh(covariance))[::-1][:3]
    variance = projected.var(axis=0, ddof=1).sum()

    assert variance == pytest.approx(top.sum(), rel=1e-6)


def test_components_are_orthonormal_and_signed():
    points = np.random.default_rng(9).normal(size=(30, 6))
    reducer = PcaReducer()
    reducer.fit_transform(points, 4, seed=2)

    np.testing.assert_allclose(reducer.components @ reducer.components.T, np.eye(4), atol=1e-9)
    for component in reducer.components:
        assert component[np.argmax(np.abs(component))] > 0
    assert list(reducer.eigenvalues) == sorted(reducer.eigenvalues, reverse=True)


def test_seed_independent_result():
    points = np.random.default_rng(2).normal(size=(15, 5)) * np.array([5, 4, 3, 2, 1])
    np.testing.assert_allclose(reduce(points, 2, seed=0), reduce(points, 2, seed=99), atol=1e-5)


def test_accepts_embedding_matrix():
    matrix = EmbeddingMatrix(np.eye(4), "test")
    assert reduce(matrix, 2, seed=0).shape == (4, 2)


def test_rank_deficient_input():
    points = np.zeros((5, 3))
    points[:, 0] = np.arange(5)
    projected = reduce(points, 3, seed=0)

    assert projected.shape == (5, 3)
    np.testing.assert_allclose(projected[:, 1:], 0, atol=1e-9)


@pytest.mark.parametrize("d,shape", [(4, (5, 3)), (0, (5, 3)), (1, (1, 3))])
def test_invalid_reduction(d, shape):
    with pytest.raises(InputError):
        reduce(np.ones(shape), d, seed=0)


def test_custom_reducer(mocker):
    reducer = mocker.Mock()
    reducer.fit_transform.return_value = np.zeros((3, 2))

    reduce(np.ones((3, 4)), 2, seed=7, reducer=reducer)
    reducer.fit_transform.assert_called_once()
    assert reducer.fit_transform.call_args.args[1:] == (2, 7)
