"""Proposal distributions.

Two distinct contracts live here:

* :class:`Proposal` -- an independent sampling density ``g(theta)`` with
  ``sample`` and ``density`` (importance and rejection samplers);
* :class:`MoveProposal` -- a Markov transition density ``g(theta, theta')``
  with ``sample`` and a two-argument ``density`` (MCMC and SMC move steps).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _as_mean_sd(mean, sd, dim=None):
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    sd = np.atleast_1d(np.asarray(sd, dtype=float))
    if dim is not None and mean.size == 1:
        mean = np.full(dim, mean[0])
    if sd.size == 1:
        sd = np.full(mean.size, sd[0])
    if sd.shape != mean.shape:
        raise ConfigurationError("mean and sd shapes disagree")
    if np.any(sd <= 0):
        raise ConfigurationError("proposal sd must be positive")
    return mean, sd


class Proposal:
    """Independent sampling density with evaluable density."""

    def sample(self, rng):
        return self.sample_batch(rng, 1)[0]

    def density(self, theta):
        return float(self.density_batch(np.atleast_2d(theta))[0])

    def sample_batch(self, rng, n):
        raise NotImplementedError

    def density_batch(self, thetas):
        raise NotImplementedError


class PriorProposal(Proposal):
    """Propose straight from the model prior (g = pi)."""

    def __init__(self, model):
        self.model = model

    def sample_batch(self, rng, n):
        return self.model.prior_sample_batch(rng, n)

    def density_batch(self, thetas):
        return self.model.prior_density_batch(thetas)


class IndependentNormalProposal(Proposal):
    """Diagonal-covariance normal proposal."""

    def __init__(self, mean, sd):
        self.mean, self.sd = _as_mean_sd(mean, sd)

    def sample_batch(self, rng, n):
        return self.mean + self.sd * rng.standard_normal((n, self.mean.size))

    def density_batch(self, thetas):
        thetas = np.atleast_2d(thetas)
        z = (thetas - self.mean) / self.sd
        log_pdf = -0.5 * np.sum(z * z, axis=1) - np.sum(
            np.log(self.sd)
        ) - self.mean.size * _LOG_SQRT_2PI
        return np.exp(log_pdf)


class MixtureProposal(Proposal):
    """Finite mixture of proposals (e.g. a defensive prior component)."""

    def __init__(self, weights, components):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or len(components) != w.size:
            raise ConfigurationError("one weight per mixture component required")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ConfigurationError("mixture weights must be positive and sum to 1")
        self.weights = w
        self.components = list(components)

    def sample_batch(self, rng, n):
        choices = rng.choice(len(self.components), size=n, p=self.weights)
        # draw from every component in index order so the stream layout does
        # not depend on the realised choice counts' order of evaluation
        out = None
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(choices == k)
            if idx.size == 0:
                continue
            draws = comp.sample_batch(rng, idx.size)
            if out is None:
                out = np.empty((n, draws.shape[1]))
            out[idx] = draws
        return out

    def density_batch(self, thetas):
        thetas = np.atleast_2d(thetas)
        dens = np.zeros(thetas.shape[0])
        for w, comp in zip(self.weights, self.components):
            dens += w * comp.density_batch(thetas)
        return dens


class MoveProposal:
    """Markov transition kernel g(theta, theta')."""

    symmetric = False

    def sample(self, theta, rng):
        raise NotImplementedError

    def density(self, theta_from, theta_to):
        raise NotImplementedError

    def sample_batch(self, thetas, rng):
        thetas = np.atleast_2d(thetas)
        return np.stack([self.sample(t, rng) for t in thetas])

    def density_pairs(self, thetas_from, thetas_to):
        thetas_from = np.atleast_2d(thetas_from)
        thetas_to = np.atleast_2d(thetas_to)
        return np.array(
            [self.density(a, b) for a, b in zip(thetas_from, thetas_to)]
        )


class GaussianRandomWalk(MoveProposal):
    """Symmetric random-walk proposal with diagonal or full covariance."""

    symmetric = True

    def __init__(self, scale=None, cov=None):
        if (scale is None) == (cov is None):
            raise ConfigurationError("give exactly one of scale or cov")
        if scale is not None:
            self.scale = np.atleast_1d(np.asarray(scale, dtype=float))
            if np.any(self.scale <= 0):
                raise ConfigurationError("random-walk scale must be positive")
            self._chol = None
        else:
            cov = np.atleast_2d(np.asarray(cov, dtype=float))
            try:
                self._chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ConfigurationError(
                    "random-walk covariance must be positive definite"
                ) from None
            self.scale = None

    def _noise(self, rng, shape):
        z = rng.standard_normal(shape)
        if self._chol is not None:
            return z @ self._chol.T
        return z * self.scale

    def sample(self, theta, rng):
        theta = np.atleast_1d(theta)
        return theta + self._noise(rng, theta.shape)

    def sample_batch(self, thetas, rng):
        thetas = np.atleast_2d(thetas)
        return thetas + self._noise(rng, thetas.shape)

    def density(self, theta_from, theta_to):
        delta = np.atleast_1d(theta_to) - np.atleast_1d(theta_from)
        if self._chol is not None:
            y = np.linalg.solve(self._chol, delta)
            quad = float(y @ y)
            log_det = float(np.sum(np.log(np.diag(self._chol))))
        else:
            quad = float(np.sum((delta / self.scale) ** 2))
            log_det = float(np.sum(np.log(self.scale)))
        return math.exp(-0.5 * quad - log_det - delta.size * _LOG_SQRT_2PI)

    def density_pairs(self, thetas_from, thetas_to):
        thetas_from = np.atleast_2d(thetas_from)
        thetas_to = np.atleast_2d(thetas_to)
        delta = thetas_to - thetas_from
        if self._chol is not None:
            y = np.linalg.solve(self._chol, delta.T).T
            quad = np.sum(y * y, axis=1)
            log_det = float(np.sum(np.log(np.diag(self._chol))))
        else:
            quad = np.sum((delta / self.scale) ** 2, axis=1)
            log_det = float(np.sum(np.log(self.scale)))
        return np.exp(-0.5 * quad - log_det - delta.shape[1] * _LOG_SQRT_2PI)


class LogScaleRandomWalk(MoveProposal):
    """Multiplicative random walk for positive scalars (tolerance moves).

    ``x' = x * exp(tau * z)`` with standard normal ``z``; the density
    includes the log-normal Jacobian, so it is deliberately asymmetric.
    """

    symmetric = False

    def __init__(self, tau):
        if tau <= 0:
            raise ConfigurationError("log-scale step size must be positive")
        self.tau = float(tau)

    def sample(self, x, rng):
        x = np.atleast_1d(x)
        return x * np.exp(self.tau * rng.standard_normal(x.shape))

    def density(self, x_from, x_to):
        x_from = float(np.atleast_1d(x_from)[0])
        x_to = float(np.atleast_1d(x_to)[0])
        if x_to <= 0 or x_from <= 0:
            return 0.0
        z = (math.log(x_to) - math.log(x_from)) / self.tau
        return math.exp(-0.5 * z * z) / (x_to * self.tau * math.sqrt(2 * math.pi))


class FixedValueProposal(MoveProposal):
    """Degenerate proposal that keeps the current value.

    Consumes no random draws, so wrapping a sampler's scale move with this
    proposal leaves its stream layout identical to the fixed-scale sampler.
    """

    symmetric = True

    def sample(self, x, rng):
        return np.array(np.atleast_1d(x), dtype=float, copy=True)

    def density(self, x_from, x_to):
        return 1.0
