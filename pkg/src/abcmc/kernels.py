"""Smoothing kernels used to weight summary-statistic discrepancies.

A kernel is a symmetric density ``K`` maximised at zero; the scaled form
is ``K_h(u) = K(u / h) / h``.  Compact-support families use the closed
support ``[-h, h]``: the boundary point belongs to the support, which is
what makes nearest-neighbour tolerance rules well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidInputError

_SQRT_2PI = math.sqrt(2.0 * math.pi)

FAMILIES = ("uniform", "gaussian", "epanechnikov", "triangular")

# Variance of the base (h = 1) kernel, used to size oracle grids.
_BASE_VARIANCE = {
    "uniform": 1.0 / 3.0,
    "gaussian": 1.0,
    "epanechnikov": 1.0 / 5.0,
    "triangular": 1.0 / 6.0,
}


def _base_eval(family, x):
    """Base kernel K(x) for |x| vectorised over x >= 0."""
    if family == "uniform":
        return np.where(x <= 1.0, 0.5, 0.0)
    if family == "gaussian":
        return np.exp(-0.5 * x * x) / _SQRT_2PI
    if family == "epanechnikov":
        return np.where(x <= 1.0, 0.75 * np.maximum(1.0 - x * x, 0.0), 0.0)
    if family == "triangular":
        return np.where(x <= 1.0, np.maximum(1.0 - x, 0.0), 0.0)
    raise ConfigurationError(f"unknown kernel family {family!r}")


@dataclass(frozen=True)
class SmoothingKernel:
    """Kernel family plus scale ``h``.

    ``scale=inf`` is an explicit sentinel for the flat initial stage of
    sequential samplers; evaluation is refused at infinite scale, callers
    special-case it.
    """

    family: str
    scale: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"unknown kernel family {self.family!r}; choose from {FAMILIES}"
            )
        if not (self.scale > 0.0):
            raise ConfigurationError(f"kernel scale must be positive, got {self.scale}")

    @property
    def compact_support(self) -> bool:
        return self.family != "gaussian"

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.scale)

    def with_scale(self, h) -> "SmoothingKernel":
        return SmoothingKernel(self.family, float(h))

    def base_variance(self) -> float:
        return _BASE_VARIANCE[self.family]


def kernel_eval(kernel: SmoothingKernel, u):
    """Evaluate ``K_h(u)`` at nonnegative distances ``u`` (scalar or array)."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("kernel argument must be finite")
    if np.any(u < 0.0):
        raise InvalidInputError("kernel argument must be nonnegative")
    if kernel.is_infinite:
        raise InvalidInputError(
            "kernel scale is infinite; callers must special-case h = inf"
        )
    out = _base_eval(kernel.family, u / kernel.scale) / kernel.scale
    return out if out.ndim else float(out)


def kernel_log_eval(kernel: SmoothingKernel, u):
    """``log K_h(u)``, with ``-inf`` outside compact supports.

    Evaluated directly in log space for the gaussian family so that tiny
    scales do not underflow to ``log 0``.
    """
    u = np.asarray(u, dtype=float)
    if kernel.is_infinite:
        raise InvalidInputError(
            "kernel scale is infinite; callers must special-case h = inf"
        )
    h = kernel.scale
    x = u / h
    if kernel.family == "gaussian":
        return -0.5 * x * x - math.log(h * _SQRT_2PI)
    with np.errstate(divide="ignore"):
        return np.log(_base_eval(kernel.family, x)) - math.log(h)


def kernel_at_zero(kernel: SmoothingKernel) -> float:
    """The kernel maximum ``K_h(0)``."""
    if kernel.is_infinite:
        raise InvalidInputError(
            "K_h(0) is undefined at the infinite-scale sentinel"
        )
    return float(_base_eval(kernel.family, np.asarray(0.0))) / kernel.scale


def critical_scale(kernel_family: str, u, required_ratio):
    """Smallest scale ``h`` at which ``K_h(u) / K_h(0)`` reaches a ratio.

    Used by the budget-constrained rejection sampler to turn a recorded
    (distance, acceptance-uniform) pair into the tolerance at which that
    attempt would first be accepted.  Returns ``inf`` where no finite scale
    suffices.  Compact-support families only.
    """
    u = np.asarray(u, dtype=float)
    r = np.clip(np.asarray(required_ratio, dtype=float), 0.0, np.inf)
    if kernel_family == "gaussian":
        raise ConfigurationError("critical scale requires a compact-support family")
    rc = np.minimum(r, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kernel_family == "uniform":
            h = u.astype(float).copy() if u.ndim else np.asarray(float(u))
        elif kernel_family == "epanechnikov":
            h = u / np.sqrt(1.0 - rc)
        elif kernel_family == "triangular":
            h = u / (1.0 - rc)
        else:
            raise ConfigurationError(f"unknown kernel family {kernel_family!r}")
    # the maximum ratio is 1, attained only at u = 0 except for the uniform
    # family which is flat on its whole support
    h = np.where(u == 0.0, 0.0, h)
    h = np.where(r > 1.0, np.inf, h)
    if kernel_family != "uniform":
        h = np.where((r >= 1.0) & (u > 0.0), np.inf, h)
    return h if h.ndim else float(h)
