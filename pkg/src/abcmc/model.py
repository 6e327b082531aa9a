"""The generative-model interface every sampler consumes.

A model bundles a prior (sampler + density), a summary simulator and the
observed summary.  Implementations must be stateless with respect to
simulation: all randomness comes through the generator argument, so a model
instance can be shared across concurrent workers.

Vectorised ``*_batch`` hooks have generic loop fallbacks; the built-in
fixtures override them since simulation dominates the run time of every
sampler here.
"""

from __future__ import annotations

import numpy as np


class GenerativeModel:
    """Abstract base: prior plus intractable summary simulator.

    Subclasses set ``param_dim``, ``summary_dim`` and ``observed_summary``
    and implement ``prior_sample``, ``prior_density`` and
    ``simulate_summary``.  ``exact_posterior_oracle`` stays ``None`` except
    on validation fixtures.
    """

    param_dim: int
    summary_dim: int
    observed_summary: np.ndarray
    exact_posterior_oracle = None

    def prior_sample(self, rng) -> np.ndarray:
        raise NotImplementedError

    def prior_density(self, theta) -> float:
        raise NotImplementedError

    def simulate_summary(self, theta, rng) -> np.ndarray:
        raise NotImplementedError

    # -- vectorised hooks ------------------------------------------------

    def prior_sample_batch(self, rng, n):
        return np.stack([self.prior_sample(rng) for _ in range(n)])

    def prior_density_batch(self, thetas):
        thetas = np.atleast_2d(thetas)
        return np.array([self.prior_density(t) for t in thetas], dtype=float)

    def simulate_batch(self, thetas, rng):
        """One summary per row of ``thetas``; shape (n, summary_dim)."""
        thetas = np.atleast_2d(thetas)
        return np.stack([self.simulate_summary(t, rng) for t in thetas])

    def simulate_replicates(self, theta, n_replicates, rng):
        """``n_replicates`` independent summaries at one theta; (T, q)."""
        return np.stack(
            [self.simulate_summary(theta, rng) for _ in range(n_replicates)]
        )
