"""Weighted-particle containers.

Populations store parameters, summary replicates and weights as contiguous
arrays (the natural layout for vectorised reweighting); individual
particles are materialised on demand as lightweight views.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .weights import effective_sample_size, normalise_weights


def as_param_vector(values):
    """Validate and return a parameter vector as a 1-D float array."""
    theta = np.atleast_1d(np.asarray(values, dtype=float))
    if theta.ndim != 1 or theta.size < 1:
        raise InvalidInputError("parameter vector must be 1-D and nonempty")
    if not np.all(np.isfinite(theta)):
        raise InvalidInputError("parameter vector must be finite")
    return theta


def as_summary_vector(values):
    """Validate and return a summary vector as a 1-D float array."""
    s = np.atleast_1d(np.asarray(values, dtype=float))
    if s.ndim != 1 or s.size < 1:
        raise InvalidInputError("summary vector must be 1-D and nonempty")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("summary vector must be finite")
    return s


@dataclass(frozen=True)
class WeightedParticle:
    """One parameter vector with its summary replicates and weights."""

    theta: np.ndarray
    summaries: np.ndarray  # (T, q)
    raw_weight: float
    normalised_weight: Optional[float] = None

    def __post_init__(self):
        if self.raw_weight < 0:
            raise InvalidInputError("raw weight must be nonnegative")


@dataclass(frozen=True)
class ParticlePopulation:
    """N weighted particles generated under a common tolerance.

    ``thetas`` has shape (N, d), ``summaries`` (N, T, q) and ``raw_weights``
    (N,).  ``tolerance`` records the kernel scale the weights were computed
    under (``inf`` for the flat initial stage of sequential samplers).
    Normalised weights and the effective sample size are computed lazily
    and cached; both raise on a fully collapsed population.
    """

    thetas: np.ndarray
    raw_weights: np.ndarray
    summaries: Optional[np.ndarray] = None
    tolerance: float = np.inf
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        raw = np.asarray(self.raw_weights, dtype=float)
        if thetas.shape[0] != raw.shape[0]:
            raise InvalidInputError("thetas and raw_weights disagree on N")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "raw_weights", raw)
        if self.summaries is not None:
            s = np.asarray(self.summaries, dtype=float)
            if s.ndim == 2:  # (N, q) -> single replicate
                s = s[:, None, :]
            if s.shape[0] != thetas.shape[0]:
                raise InvalidInputError("summaries and thetas disagree on N")
            object.__setattr__(self, "summaries", s)

    def __len__(self):
        return self.thetas.shape[0]

    @property
    def param_dim(self):
        return self.thetas.shape[1]

    @property
    def normalised_weights(self):
        if "normalised" not in self._cache:
            self._cache["normalised"] = normalise_weights(self.raw_weights)
        return self._cache["normalised"]

    def ess(self):
        if "ess" not in self._cache:
            self._cache["ess"] = effective_sample_size(self.normalised_weights)
        return self._cache["ess"]

    def particle(self, i) -> WeightedParticle:
        summaries = (
            self.summaries[i] if self.summaries is not None else np.empty((0, 0))
        )
        try:
            normalised = float(self.normalised_weights[i])
        except Exception:
            normalised = None
        return WeightedParticle(
            theta=self.thetas[i],
            summaries=summaries,
            raw_weight=float(self.raw_weights[i]),
            normalised_weight=normalised,
        )

    def particles(self):
        return [self.particle(i) for i in range(len(self))]
