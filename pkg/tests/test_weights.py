import math

import numpy as np
import pytest

from abcmc.distances import DistanceMetric
from abcmc.errors import DegeneratePopulationError, InvalidInputError
from abcmc.kernels import SmoothingKernel
from abcmc.weights import (
    effective_sample_size,
    ess_from_log_weights,
    normalise_weights,
    normalised_from_log_weights,
    weighted_kernel_mass,
)


def test_normalise_examples():
    np.testing.assert_allclose(normalise_weights([2, 2, 4]), [0.25, 0.25, 0.5])
    np.testing.assert_allclose(normalise_weights([5.0]), [1.0])


def test_normalise_all_zero_raises():
    with pytest.raises(DegeneratePopulationError):
        normalise_weights([0.0, 0.0])


def test_normalise_invalid_inputs():
    with pytest.raises(InvalidInputError):
        normalise_weights([])
    with pytest.raises(InvalidInputError):
        normalise_weights([1.0, -0.5])
    with pytest.raises(InvalidInputError):
        normalise_weights([1.0, math.inf])


def test_normalise_sums_to_one():
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = normalise_weights(rng.gamma(0.3, size=rng.integers(1, 50)))
        assert abs(w.sum() - 1.0) < 1e-12


def test_ess_identities():
    assert effective_sample_size([0.25] * 4) == pytest.approx(4.0)
    assert effective_sample_size([1.0, 0.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert effective_sample_size([0.5, 0.5, 0.0, 0.0]) == pytest.approx(2.0)


def test_ess_requires_normalised():
    with pytest.raises(InvalidInputError):
        effective_sample_size([0.5, 0.6])


def test_ess_bounds_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 60))
        w = normalise_weights(rng.gamma(0.2, size=n) + 1e-300)
        ess = effective_sample_size(w)
        assert 1.0 - 1e-9 <= ess <= n + 1e-9


def test_log_weight_helpers_match_linear():
    rng = np.random.default_rng(2)
    w = rng.gamma(0.5, size=40)
    lw = np.log(w)
    assert ess_from_log_weights(lw) == pytest.approx(
        effective_sample_size(normalise_weights(w)), rel=1e-10
    )
    np.testing.assert_allclose(
        normalised_from_log_weights(lw), normalise_weights(w), rtol=1e-10
    )
    with pytest.raises(DegeneratePopulationError):
        ess_from_log_weights(np.full(5, -np.inf))


def test_weighted_kernel_mass_examples(metric):
    k = SmoothingKernel("uniform", 1.0)
    s_obs = np.array([0.0])
    assert weighted_kernel_mass(k, metric, np.array([[0.0]]), s_obs) == 0.5
    # one replicate inside the support, one outside
    assert weighted_kernel_mass(
        k, metric, np.array([[0.5], [3.0]]), s_obs
    ) == pytest.approx(0.25)
    kg = SmoothingKernel("gaussian", 1.0)
    expected = np.mean([math.exp(-0.5 * d * d) / math.sqrt(2 * math.pi)
                        for d in (0.0, 1.0, 2.0)])
    assert weighted_kernel_mass(
        kg, metric, np.array([[0.0], [1.0], [2.0]]), s_obs
    ) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.23163466, abs=1e-8)


def test_weighted_kernel_mass_empty(metric):
    with pytest.raises(InvalidInputError):
        weighted_kernel_mass(SmoothingKernel("uniform", 1.0), metric,
                             np.empty((0, 1)), np.array([0.0]))
