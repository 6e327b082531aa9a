import numpy as np
import pytest

from abcmc.distances import DistanceMetric
from abcmc.model import GenerativeModel
from abcmc.models import NormalMeanModel
from abcmc.proposals import MoveProposal


@pytest.fixture
def model():
    return NormalMeanModel.canonical()


@pytest.fixture
def metric():
    return DistanceMetric("euclidean")


class ThreeStateModel(GenerativeModel):
    """Discrete fixture with enumerable smoothed posterior.

    Three parameter values {0, 1, 2} with known prior mass and known
    probability of simulating a hit summary (s = 1, the observation).
    Under a uniform kernel with scale below one, the smoothed posterior is
    exactly prior * hit probability, which makes chain flows checkable.
    """

    param_dim = 1
    summary_dim = 1

    def __init__(self, prior=(0.2, 0.3, 0.5), hit_prob=(0.15, 0.5, 0.85)):
        self.prior = np.asarray(prior, dtype=float)
        self.hit_prob = np.asarray(hit_prob, dtype=float)
        self.observed_summary = np.array([1.0])

    def target_mass(self):
        p = self.prior * self.hit_prob
        return p / p.sum()

    def prior_sample(self, rng):
        return np.array([float(rng.choice(3, p=self.prior))])

    def prior_density(self, theta):
        return float(self.prior[int(round(float(np.atleast_1d(theta)[0])))])

    def simulate_summary(self, theta, rng):
        k = int(round(float(np.atleast_1d(theta)[0])))
        return np.array([1.0 if rng.random() < self.hit_prob[k] else 0.0])

    def simulate_replicates(self, theta, n_replicates, rng):
        k = int(round(float(np.atleast_1d(theta)[0])))
        hits = rng.random(n_replicates) < self.hit_prob[k]
        return hits.astype(float)[:, None]


class OtherStateProposal(MoveProposal):
    """Propose uniformly one of the other two discrete states."""

    symmetric = True

    def sample(self, theta, rng):
        k = int(round(float(np.atleast_1d(theta)[0])))
        step = 1 + int(rng.random() < 0.5)
        return np.array([float((k + step) % 3)])

    def density(self, theta_from, theta_to):
        return 0.5


@pytest.fixture
def three_state():
    return ThreeStateModel()


@pytest.fixture
def other_state_proposal():
    return OtherStateProposal()
