import numpy as np
import pytest

from abcmc.distances import DistanceMetric, precision_metric_from_summaries
from abcmc.errors import ConfigurationError, InvalidInputError


def test_euclidean_examples():
    m = DistanceMetric("euclidean")
    assert m(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert m(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(5.0)


def test_mahalanobis_quadratic_form():
    m = DistanceMetric("mahalanobis", matrix=np.diag([4.0, 1.0]))
    # direct evaluation: sqrt(4*1 + 1*1)
    assert m(np.zeros(2), np.ones(2)) == pytest.approx(np.sqrt(5.0))


def test_weighted_euclidean():
    m = DistanceMetric("weighted_euclidean", weights=[4.0, 1.0])
    assert m(np.zeros(2), np.ones(2)) == pytest.approx(np.sqrt(5.0))


def test_dimension_mismatch():
    m = DistanceMetric("euclidean")
    with pytest.raises(InvalidInputError):
        m(np.zeros(2), np.zeros(3))
    m2 = DistanceMetric("mahalanobis", matrix=np.eye(2))
    with pytest.raises(InvalidInputError):
        m2.batch(np.zeros((4, 3)), np.zeros(3))


def test_not_positive_definite_rejected():
    with pytest.raises(ConfigurationError):
        DistanceMetric("mahalanobis", matrix=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ConfigurationError):
        DistanceMetric("mahalanobis", matrix=np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ConfigurationError):
        DistanceMetric("weighted_euclidean", weights=[1.0, -1.0])


@pytest.mark.parametrize("kind,kwargs", [
    ("euclidean", {}),
    ("weighted_euclidean", {"weights": [0.5, 2.0, 1.3]}),
    ("mahalanobis", {"matrix": np.array([[2.0, 0.3, 0.0],
                                         [0.3, 1.0, 0.1],
                                         [0.0, 0.1, 0.7]])}),
])
def test_metric_axioms(kind, kwargs):
    rng = np.random.default_rng(3)
    m = DistanceMetric(kind, **kwargs)
    for _ in range(50):
        a, b = rng.normal(size=3), rng.normal(size=3)
        dab, dba = m(a, b), m(b, a)
        assert dab >= 0
        assert dab == pytest.approx(dba, rel=1e-12)
        assert m(a, a) == pytest.approx(0.0, abs=1e-12)


def test_batch_matches_scalar():
    rng = np.random.default_rng(4)
    m = DistanceMetric("mahalanobis", matrix=np.array([[2.0, 0.5], [0.5, 1.0]]))
    rows = rng.normal(size=(20, 2))
    ref = rng.normal(size=2)
    batch = m.batch(rows, ref)
    for i, row in enumerate(rows):
        assert batch[i] == pytest.approx(m(row, ref), rel=1e-12)


def test_precision_metric_from_pilot():
    rng = np.random.default_rng(5)
    cov = np.array([[4.0, 1.0], [1.0, 2.0]])
    chol = np.linalg.cholesky(cov)
    pilot = rng.standard_normal((20_000, 2)) @ chol.T
    m = precision_metric_from_summaries(pilot)
    # whitened distances: unit-variance direction scaling recovered
    assert m.matrix.shape == (2, 2)
    np.testing.assert_allclose(m.matrix, np.linalg.inv(np.cov(pilot.T)),
                               rtol=1e-8)
    with pytest.raises(ConfigurationError):
        precision_metric_from_summaries(np.zeros((2, 3)))
