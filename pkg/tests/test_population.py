import numpy as np
import pytest

from abcmc.errors import DegeneratePopulationError, InvalidInputError
from abcmc.population import (
    ParticlePopulation,
    WeightedParticle,
    as_param_vector,
    as_summary_vector,
)


def test_vector_validation():
    np.testing.assert_array_equal(as_param_vector(1.5), [1.5])
    np.testing.assert_array_equal(as_summary_vector([1, 2]), [1.0, 2.0])
    with pytest.raises(InvalidInputError):
        as_param_vector([np.nan])
    with pytest.raises(InvalidInputError):
        as_summary_vector([np.inf, 0.0])
    with pytest.raises(InvalidInputError):
        as_param_vector([])


def test_particle_weight_nonnegative():
    with pytest.raises(InvalidInputError):
        WeightedParticle(theta=np.array([0.0]), summaries=np.zeros((1, 1)),
                         raw_weight=-1.0)


def test_population_basics():
    pop = ParticlePopulation(
        thetas=np.array([[0.0], [1.0], [2.0]]),
        raw_weights=np.array([2.0, 2.0, 4.0]),
        summaries=np.zeros((3, 2, 1)),
        tolerance=0.5,
    )
    assert len(pop) == 3
    assert pop.param_dim == 1
    np.testing.assert_allclose(pop.normalised_weights, [0.25, 0.25, 0.5])
    assert pop.ess() == pytest.approx(1.0 / (0.0625 + 0.0625 + 0.25))
    particle = pop.particle(2)
    assert particle.raw_weight == 4.0
    assert particle.normalised_weight == pytest.approx(0.5)
    assert particle.summaries.shape == (2, 1)


def test_population_ess_bounds():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(1, 40))
        pop = ParticlePopulation(
            thetas=rng.normal(size=(n, 2)),
            raw_weights=rng.gamma(0.4, size=n) + 1e-12,
        )
        assert 1.0 - 1e-9 <= pop.ess() <= n + 1e-9


def test_population_collapse_raises_on_use():
    pop = ParticlePopulation(thetas=np.zeros((2, 1)),
                             raw_weights=np.zeros(2))
    with pytest.raises(DegeneratePopulationError):
        pop.normalised_weights


def test_population_shape_checks():
    with pytest.raises(InvalidInputError):
        ParticlePopulation(thetas=np.zeros((3, 1)), raw_weights=np.zeros(2))
    with pytest.raises(InvalidInputError):
        ParticlePopulation(thetas=np.zeros((3, 1)), raw_weights=np.ones(3),
                           summaries=np.zeros((2, 1, 1)))


def test_single_replicate_summary_promoted():
    pop = ParticlePopulation(thetas=np.zeros((2, 1)), raw_weights=np.ones(2),
                             summaries=np.zeros((2, 3)))
    assert pop.summaries.shape == (2, 1, 3)
