"""Distance metrics on summary-statistic space."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, InvalidInputError

KINDS = ("euclidean", "weighted_euclidean", "mahalanobis")


class DistanceMetric:
    """Euclidean, diagonally weighted, or Mahalanobis distance.

    ``weighted_euclidean`` takes a positive weight vector ``w`` and computes
    ``sqrt(sum(w * delta**2))``; ``mahalanobis`` takes a symmetric positive
    definite matrix ``W`` and computes ``sqrt(delta' W delta)``.  Definiteness
    is validated at construction so distance evaluation can stay cheap.
    """

    def __init__(self, kind="euclidean", weights=None, matrix=None):
        if kind not in KINDS:
            raise ConfigurationError(f"unknown metric kind {kind!r}; choose from {KINDS}")
        self.kind = kind
        self.weights = None
        self.matrix = None
        self._chol = None
        if kind == "weighted_euclidean":
            if weights is None:
                raise ConfigurationError("weighted_euclidean requires a weight vector")
            w = np.asarray(weights, dtype=float)
            if w.ndim != 1 or not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ConfigurationError("weight vector must be 1-D, finite and positive")
            self.weights = w
        elif kind == "mahalanobis":
            if matrix is None:
                raise ConfigurationError("mahalanobis requires a weight matrix")
            m = np.asarray(matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ConfigurationError("weight matrix must be square")
            if not np.allclose(m, m.T, rtol=1e-10, atol=1e-12):
                raise ConfigurationError("weight matrix must be symmetric")
            try:
                chol = np.linalg.cholesky(m)
            except np.linalg.LinAlgError:
                raise ConfigurationError(
                    "weight matrix must be positive definite"
                ) from None
            self.matrix = m
            self._chol = chol

    def _expected_dim(self):
        if self.weights is not None:
            return self.weights.shape[0]
        if self.matrix is not None:
            return self.matrix.shape[0]
        return None

    def __call__(self, s, s_ref):
        """Distance between two summary vectors."""
        s = np.asarray(s, dtype=float)
        s_ref = np.asarray(s_ref, dtype=float)
        if s.shape != s_ref.shape or s.ndim != 1:
            raise InvalidInputError(
                f"summary dimensions do not match: {s.shape} vs {s_ref.shape}"
            )
        return float(self.batch(s[None, :], s_ref)[0])

    def batch(self, summaries, s_ref):
        """Distances from each row of ``summaries`` to ``s_ref``.

        ``summaries`` may have any leading shape; the last axis is the
        summary dimension.  Returns distances with the leading shape.
        """
        summaries = np.asarray(summaries, dtype=float)
        s_ref = np.asarray(s_ref, dtype=float)
        q = summaries.shape[-1]
        if s_ref.shape != (q,):
            raise InvalidInputError(
                f"summary dimensions do not match: {summaries.shape} vs {s_ref.shape}"
            )
        expected = self._expected_dim()
        if expected is not None and expected != q:
            raise InvalidInputError(
                f"metric is configured for dimension {expected}, got {q}"
            )
        delta = summaries - s_ref
        if self.kind == "euclidean":
            sq = np.sum(delta * delta, axis=-1)
        elif self.kind == "weighted_euclidean":
            sq = np.sum(self.weights * delta * delta, axis=-1)
        else:
            proj = delta @ self._chol
            sq = np.sum(proj * proj, axis=-1)
        return np.sqrt(sq)


def precision_metric_from_summaries(summaries) -> DistanceMetric:
    """Mahalanobis metric from a pilot batch of simulated summaries.

    The weight matrix is the sample precision (inverse covariance) of the
    pilot summaries, the usual way to put heterogeneous summary statistics
    on a common scale before computing discrepancies.
    """
    s = np.atleast_2d(np.asarray(summaries, dtype=float))
    if s.shape[0] < s.shape[1] + 1:
        raise ConfigurationError(
            "pilot batch too small to estimate a summary covariance"
        )
    cov = np.cov(s, rowvar=False)
    cov = np.atleast_2d(cov)
    try:
        prec = np.linalg.inv(cov)
    except np.linalg.LinAlgError:
        raise ConfigurationError("pilot summary covariance is singular") from None
    # enforce exact symmetry before the PD check
    prec = 0.5 * (prec + prec.T)
    return DistanceMetric(kind="mahalanobis", matrix=prec)
