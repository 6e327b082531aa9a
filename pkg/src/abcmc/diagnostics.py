"""Weighted-sample summaries and the comparison statistics used by the
validation suite (Kolmogorov-Smirnov distances, Monte Carlo standard
errors, sojourn times, efficiency per simulator call)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePopulationError, InvalidInputError
from .weights import normalise_weights


@dataclass
class RunStatistics:
    """Cost and health counters reported by every sampler."""

    simulator_calls: int = 0
    acceptance_rate: float = float("nan")
    wall_time: float = 0.0
    ess_final: float = float("nan")

    def __post_init__(self):
        if self.simulator_calls < 0:
            raise InvalidInputError("simulator_calls must be nonnegative")


def _thetas_weights(population, weights=None):
    """Accept a ParticlePopulation or a plain (values, weights) pair."""
    if hasattr(population, "thetas"):
        return population.thetas, population.normalised_weights
    values = np.atleast_2d(np.asarray(population, dtype=float))
    if values.shape[0] == 1 and values.shape[1] > 1:
        values = values.T
    if weights is None:
        weights = np.full(values.shape[0], 1.0 / values.shape[0])
    else:
        weights = normalise_weights(weights)
    return values, weights


def weighted_moments(population, weights=None):
    """Self-normalised weighted mean and covariance.

    The covariance uses the ``1 / (1 - sum W_i**2)`` small-sample
    correction (reduces to the ``n - 1`` denominator under equal weights).
    A population concentrated on a single particle has zero covariance.
    """
    thetas, w = _thetas_weights(population, weights)
    mean = w @ thetas
    centred = thetas - mean
    scatter = (w[:, None] * centred).T @ centred
    denom = 1.0 - float(np.sum(w * w))
    if denom <= 1e-15:
        cov = np.zeros_like(scatter)
    else:
        cov = scatter / denom
    return mean, cov


def weighted_quantile(population, coordinate=0, p=0.5, weights=None):
    """Left-continuous inverse of the weighted empirical CDF."""
    if not 0.0 < p < 1.0:
        raise InvalidInputError("quantile level must lie in (0, 1)")
    thetas, w = _thetas_weights(population, weights)
    x = thetas[:, coordinate]
    order = np.argsort(x, kind="stable")
    cum = np.cumsum(w[order])
    idx = int(np.searchsorted(cum, p, side="left"))
    idx = min(idx, x.size - 1)
    return float(x[order][idx])


def sojourn_times(trace, coordinate=0, threshold=0.0):
    """Lengths of maximal runs spent above a threshold.

    ``trace`` may be a ChainTrace (its parameter path is used) or any 1-D
    sequence.  A tail-mixing diagnostic: long sojourns mean the chain gets
    stuck above the threshold.
    """
    if hasattr(trace, "thetas"):
        x = np.asarray(trace.thetas)[:, coordinate]
    else:
        x = np.asarray(trace, dtype=float)
    above = x > threshold
    if not above.any():
        return []
    padded = np.concatenate([[False], above, [False]]).astype(int)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return list((ends - starts).astype(int))


def _weighted_cdf_points(values, weights):
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise InvalidInputError("empty sample")
    if weights is None:
        weights = np.full(values.size, 1.0 / values.size)
    else:
        weights = normalise_weights(weights)
    order = np.argsort(values, kind="stable")
    return values[order], np.cumsum(weights[order])


def ks_distance(sample_a, sample_b, weights_a=None, weights_b=None):
    """Sup-norm distance between weighted empirical CDFs.

    ``sample_b`` may instead be a callable analytic CDF.  Computed exactly
    on the merged jump points, no binning.
    """
    xa, ca = _weighted_cdf_points(sample_a, weights_a)
    if callable(sample_b):
        g = np.asarray(sample_b(xa), dtype=float)
        left = np.concatenate([[0.0], ca[:-1]])
        return float(np.max(np.maximum(np.abs(ca - g), np.abs(left - g))))
    xb, cb = _weighted_cdf_points(sample_b, weights_b)
    grid = np.concatenate([xa, xb])
    grid.sort(kind="stable")
    fa = np.concatenate([[0.0], ca])[np.searchsorted(xa, grid, side="right")]
    fb = np.concatenate([[0.0], cb])[np.searchsorted(xb, grid, side="right")]
    return float(np.max(np.abs(fa - fb)))


def ess_per_simulator_call(stats: RunStatistics):
    """The chapter's efficiency notion collapsed to one scalar."""
    if stats.simulator_calls <= 0:
        raise InvalidInputError("simulator_calls must be positive")
    return stats.ess_final / stats.simulator_calls


# -- Monte Carlo standard errors -------------------------------------------


def bootstrap_se_weighted_mean(values, raw_weights, n_boot=400, seed=0,
                               coordinate=0):
    """Bootstrap standard error of a self-normalised weighted mean.

    Resamples (theta, weight) pairs with replacement and recomputes the
    ratio estimator per replicate.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 1 and values.shape[1] > 1:
        values = values.T
    x = values[:, coordinate]
    w = np.asarray(raw_weights, dtype=float)
    if w.sum() <= 0:
        raise DegeneratePopulationError("all weights are zero")
    rng = np.random.default_rng(seed)
    n = x.size
    means = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        wb = w[idx]
        tot = wb.sum()
        if tot <= 0:
            means[b] = np.nan
            continue
        means[b] = float(wb @ x[idx] / tot)
    means = means[np.isfinite(means)]
    if means.size < 2:
        raise DegeneratePopulationError("bootstrap produced no valid replicates")
    return float(np.std(means, ddof=1))


def batch_means_se(chain, n_batches=None):
    """Batch-means standard error of a (correlated) chain mean."""
    x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if n < 16:
        raise InvalidInputError("chain too short for batch means")
    if n_batches is None:
        n_batches = max(int(math.sqrt(n)), 8)
    batch = n // n_batches
    trimmed = x[: batch * n_batches].reshape(n_batches, batch)
    means = trimmed.mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


def markov_chain_ess(chain):
    """Autocorrelation-adjusted effective sample size via batch means."""
    x = np.asarray(chain, dtype=float).ravel()
    se = batch_means_se(x)
    s = float(np.std(x, ddof=1))
    if se <= 0 or s <= 0:
        return float(x.size)
    return min(float(x.size), (s / se) ** 2)


def r_hat(chains):
    """Gelman-Rubin ratio across chains (reported, never asserted on)."""
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    m, n = chains.shape
    if m < 2 or n < 2:
        raise InvalidInputError("r_hat needs at least two chains of length two")
    means = chains.mean(axis=1)
    w = float(np.mean(chains.var(axis=1, ddof=1)))
    b = n * float(np.var(means, ddof=1))
    if w <= 0:
        return float("nan")
    var_plus = (n - 1) / n * w + b / n
    return float(math.sqrt(var_plus / w))
