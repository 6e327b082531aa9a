"""Importance-weight arithmetic: normalisation, effective sample size, and
the kernel-mass likelihood factor shared by the pseudo-marginal samplers."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .errors import DegeneratePopulationError, InvalidInputError
from .kernels import SmoothingKernel, kernel_eval


def normalise_weights(raw):
    """Normalise nonnegative raw weights to sum to one.

    Raises :class:`DegeneratePopulationError` when every weight is zero;
    silent division by zero would hide total particle collapse, which is a
    first-class diagnostic event.
    """
    w = np.asarray(raw, dtype=float)
    if w.size == 0:
        raise InvalidInputError("weight list is empty")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("weights must be finite")
    if np.any(w < 0.0):
        raise InvalidInputError("weights must be nonnegative")
    total = w.sum()
    if total <= 0.0:
        raise DegeneratePopulationError("all weights are zero (population collapse)")
    return w / total


def effective_sample_size(normalised):
    """ESS of a normalised weight vector: ``1 / sum(W_i**2)``."""
    w = np.asarray(normalised, dtype=float)
    if w.size == 0:
        raise InvalidInputError("weight list is empty")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("weights must be finite")
    total = w.sum()
    if abs(total - 1.0) > 1e-9:
        raise InvalidInputError(
            f"weights are not normalised (sum = {total!r}); "
            "call normalise_weights first"
        )
    return 1.0 / float(np.sum(w * w))


def ess_from_log_weights(log_w):
    """ESS computed from unnormalised log weights (overflow safe)."""
    lw = np.asarray(log_w, dtype=float)
    if lw.size == 0:
        raise InvalidInputError("weight list is empty")
    total = logsumexp(lw)
    if not np.isfinite(total):
        raise DegeneratePopulationError("all weights are zero (population collapse)")
    return float(np.exp(-logsumexp(2.0 * (lw - total))))


def normalised_from_log_weights(log_w):
    """Normalised weights from unnormalised log weights."""
    lw = np.asarray(log_w, dtype=float)
    total = logsumexp(lw)
    if not np.isfinite(total):
        raise DegeneratePopulationError("all weights are zero (population collapse)")
    return np.exp(lw - total)


def weighted_kernel_mass(kernel: SmoothingKernel, metric, summaries, s_obs):
    """Replicate-averaged kernel mass ``mean_t K_h(||s(t) - s_obs||)``.

    This is the unnormalised-likelihood estimate used in place of the
    intractable ``p(s_obs | theta)`` by every pseudo-marginal acceptance
    ratio; with one replicate it reduces to a single kernel evaluation.
    """
    summaries = np.atleast_2d(np.asarray(summaries, dtype=float))
    if summaries.shape[0] == 0:
        raise InvalidInputError("at least one summary replicate is required")
    d = metric.batch(summaries, np.asarray(s_obs, dtype=float))
    return float(np.mean(kernel_eval(kernel, d)))
