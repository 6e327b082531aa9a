"""Built-in generative-model fixtures with exact-posterior oracles, the
smoothed-posterior quadrature oracle used by the validation suite, and the
model registry that lets run configurations name models."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import (
    ConfigurationError,
    InvalidInputError,
    OracleResolutionError,
    RegistrationError,
)
from .kernels import SmoothingKernel, kernel_eval
from .model import GenerativeModel


class NormalMeanModel(GenerativeModel):
    """Normal data with unknown mean and known sd; summary = sample mean.

    The sample mean is sufficient for the mean, so the smoothed posterior
    converges to the exact conjugate posterior as the kernel scale shrinks.
    The summary is simulated directly from its exact sampling distribution
    ``N(theta, data_sd**2 / n_obs)``, which is distributionally identical to
    averaging ``n_obs`` draws.
    """

    param_dim = 1
    summary_dim = 1

    def __init__(self, n_obs=10, data_sd=1.0, prior_mean=0.0, prior_sd=10.0,
                 observed_summary=1.0):
        if n_obs < 0:
            raise ConfigurationError("n_obs must be nonnegative")
        if data_sd <= 0 or prior_sd <= 0:
            raise ConfigurationError("data_sd and prior_sd must be positive")
        self.n_obs = int(n_obs)
        self.data_sd = float(data_sd)
        self.prior_mean = float(prior_mean)
        self.prior_sd = float(prior_sd)
        self.observed_summary = np.array([float(observed_summary)])

    @classmethod
    def canonical(cls):
        """The single configuration shared by the whole validation suite."""
        return cls(n_obs=10, data_sd=1.0, prior_mean=0.0, prior_sd=10.0,
                   observed_summary=1.0)

    @property
    def summary_sd(self):
        if self.n_obs == 0:
            raise InvalidInputError("summary undefined for n_obs = 0")
        return self.data_sd / math.sqrt(self.n_obs)

    def prior_sample(self, rng):
        return np.array([rng.normal(self.prior_mean, self.prior_sd)])

    def prior_sample_batch(self, rng, n):
        return rng.normal(self.prior_mean, self.prior_sd, size=(n, 1))

    def prior_density(self, theta):
        return float(self.prior_density_batch(np.atleast_2d(theta))[0])

    def prior_density_batch(self, thetas):
        thetas = np.atleast_2d(thetas)
        z = (thetas[:, 0] - self.prior_mean) / self.prior_sd
        return np.exp(-0.5 * z * z) / (self.prior_sd * math.sqrt(2 * math.pi))

    def simulate_summary(self, theta, rng):
        theta = np.atleast_1d(theta)
        return np.array([rng.normal(theta[0], self.summary_sd)])

    def simulate_batch(self, thetas, rng):
        thetas = np.atleast_2d(thetas)
        return rng.normal(thetas[:, 0], self.summary_sd)[:, None]

    def simulate_replicates(self, theta, n_replicates, rng):
        theta = np.atleast_1d(theta)
        return rng.normal(theta[0], self.summary_sd, size=n_replicates)[:, None]

    @property
    def exact_posterior_oracle(self):
        mu, sd = exact_posterior(self)
        return stats.norm(mu, sd)

    def summary_density_batch(self, s_grid, thetas):
        """p(s | theta) on a grid; rows index theta, columns index s."""
        thetas = np.atleast_2d(thetas)
        z = (s_grid[None, :] - thetas[:, 0:1]) / self.summary_sd
        return np.exp(-0.5 * z * z) / (self.summary_sd * math.sqrt(2 * math.pi))


class NormalMeanSdModel(GenerativeModel):
    """Normal data with unknown mean and log-sd; summary = (mean, log sd).

    Exercises multivariate parameters and two-dimensional summaries (hence
    non-trivial distance metrics).  The summary pair is simulated through
    its exact sampling distribution: the sample mean is normal and the
    sample variance is a scaled chi-square, independent of the mean.
    """

    param_dim = 2
    summary_dim = 2

    def __init__(self, n_obs=20, prior_mean=(0.0, 0.0), prior_sd=(3.0, 1.0),
                 observed_summary=(1.0, 0.0)):
        if n_obs < 2:
            raise ConfigurationError("n_obs must be at least 2 (sample sd)")
        self.n_obs = int(n_obs)
        self.prior_mean = np.asarray(prior_mean, dtype=float)
        self.prior_sd = np.asarray(prior_sd, dtype=float)
        if self.prior_mean.shape != (2,) or self.prior_sd.shape != (2,):
            raise ConfigurationError("prior_mean and prior_sd must have length 2")
        if np.any(self.prior_sd <= 0):
            raise ConfigurationError("prior sds must be positive")
        self.observed_summary = np.asarray(observed_summary, dtype=float)

    def prior_sample(self, rng):
        return self.prior_mean + self.prior_sd * rng.standard_normal(2)

    def prior_sample_batch(self, rng, n):
        return self.prior_mean + self.prior_sd * rng.standard_normal((n, 2))

    def prior_density(self, theta):
        return float(self.prior_density_batch(np.atleast_2d(theta))[0])

    def prior_density_batch(self, thetas):
        thetas = np.atleast_2d(thetas)
        z = (thetas - self.prior_mean) / self.prior_sd
        log_pdf = -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(self.prior_sd)) \
            - math.log(2 * math.pi)
        return np.exp(log_pdf)

    def simulate_summary(self, theta, rng):
        return self.simulate_batch(np.atleast_2d(theta), rng)[0]

    def simulate_batch(self, thetas, rng):
        thetas = np.atleast_2d(thetas)
        n = thetas.shape[0]
        sigma = np.exp(thetas[:, 1])
        mean = rng.normal(thetas[:, 0], sigma / math.sqrt(self.n_obs))
        var = sigma**2 * rng.chisquare(self.n_obs - 1, size=n) / (self.n_obs - 1)
        return np.column_stack([mean, 0.5 * np.log(var)])

    def simulate_replicates(self, theta, n_replicates, rng):
        return self.simulate_batch(
            np.repeat(np.atleast_2d(theta), n_replicates, axis=0), rng
        )


def exact_posterior(model: NormalMeanModel):
    """Conjugate posterior (mean, sd) for :class:`NormalMeanModel`."""
    s_obs = float(model.observed_summary[0])
    prec = 1.0 / model.prior_sd**2 + model.n_obs / model.data_sd**2
    mu = (model.prior_mean / model.prior_sd**2
          + model.n_obs * s_obs / model.data_sd**2) / prec
    return float(mu), float(math.sqrt(1.0 / prec))


# -- quadrature oracle ----------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Grid for the quadrature oracle.  ``None`` entries are auto-sized."""

    theta_lo: float = None
    theta_hi: float = None
    n_theta: int = 2001
    n_s: int = None


class GriddedDensity:
    """A normalised density tabulated on a grid, with interpolating CDF."""

    def __init__(self, grid, density):
        self.grid = np.asarray(grid, dtype=float)
        density = np.clip(np.asarray(density, dtype=float), 0.0, np.inf)
        norm = np.trapezoid(density, self.grid)
        if not norm > 0:
            raise OracleResolutionError("oracle density integrates to zero")
        self.pdf = density / norm
        # trapezoid cumulative integral, exact at the grid nodes
        steps = np.diff(self.grid) * 0.5 * (self.pdf[1:] + self.pdf[:-1])
        self._cdf_grid = np.concatenate([[0.0], np.cumsum(steps)])
        self._cdf_grid /= self._cdf_grid[-1]

    def mean(self):
        return float(np.trapezoid(self.grid * self.pdf, self.grid))

    def sd(self):
        m = self.mean()
        var = float(np.trapezoid((self.grid - m) ** 2 * self.pdf, self.grid))
        return math.sqrt(max(var, 0.0))

    def cdf(self, x):
        return np.interp(x, self.grid, self._cdf_grid, left=0.0, right=1.0)

    def density(self, x):
        return np.interp(x, self.grid, self.pdf, left=0.0, right=0.0)


def _auto_theta_range(model: NormalMeanModel, kernel: SmoothingKernel):
    """Centre/half-width proxy from the conjugate form with the likelihood
    variance inflated by the kernel's variance at scale h."""
    eff_var = model.summary_sd**2 + kernel.base_variance() * kernel.scale**2
    prec = 1.0 / model.prior_sd**2 + 1.0 / eff_var
    centre = (model.prior_mean / model.prior_sd**2
              + float(model.observed_summary[0]) / eff_var) / prec
    sd = math.sqrt(1.0 / prec)
    return centre - 10.0 * sd, centre + 10.0 * sd, sd


def abc_posterior_quadrature(model, kernel: SmoothingKernel, grid: GridSpec = None):
    """Deterministic quadrature of the smoothed posterior for the
    1-D conjugate fixture.

    Integrates ``K_h(|s - s_obs|) p(s | theta) pi(theta)`` over ``s`` on a
    dense grid per theta node (Simpson), then normalises over the theta
    grid.  This is the reference density every sampler is validated
    against, so it refuses to run on grids too coarse to resolve the
    kernel scale.
    """
    if not isinstance(model, NormalMeanModel):
        raise ConfigurationError(
            "the deterministic quadrature oracle supports NormalMeanModel; "
            "use abc_posterior_montecarlo for other fixtures"
        )
    if kernel.is_infinite:
        raise InvalidInputError("oracle requires a finite kernel scale")
    grid = grid or GridSpec()
    h = kernel.scale
    lo, hi, sd_proxy = _auto_theta_range(model, kernel)
    theta_lo = grid.theta_lo if grid.theta_lo is not None else lo
    theta_hi = grid.theta_hi if grid.theta_hi is not None else hi
    n_theta = int(grid.n_theta)
    n_s = int(grid.n_s) | 1  # Simpson needs an odd point count

    theta_step = (theta_hi - theta_lo) / (n_theta - 1)
    if theta_step > sd_proxy / 20.0:
        raise OracleResolutionError(
            f"theta grid step {theta_step:.3g} too coarse for posterior scale "
            f"{sd_proxy:.3g}"
        )
    support = h if kernel.compact_support else 12.0 * h
    s_step = 2.0 * support / (n_s - 1)
    if s_step > h / 20.0:
        raise OracleResolutionError(
            f"s grid step {s_step:.3g} too coarse for kernel scale {h:.3g}"
        )

    thetas = np.linspace(theta_lo, theta_hi, n_theta)
    u = np.linspace(-support, support, n_s)
    k_vals = kernel_eval(kernel, np.abs(u))
    s_grid = float(model.observed_summary[0]) + u
    # Simpson weights
    w = np.ones(n_s)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= s_step / 3.0
    lik = model.summary_density_batch(s_grid, thetas[:, None])  # (n_theta, n_s)
    smoothed = lik @ (k_vals * w)
    prior = model.prior_density_batch(thetas[:, None])
    return GriddedDensity(thetas, smoothed * prior)


def uniform_kernel_smoothed_posterior(model: NormalMeanModel, h, grid: GridSpec = None):
    """Closed-form counterpart of the oracle for the uniform kernel.

    The s-integral collapses to a difference of normal CDFs; used to
    cross-check the generic quadrature.
    """
    grid = grid or GridSpec()
    kernel = SmoothingKernel("uniform", float(h))
    lo, hi, _ = _auto_theta_range(model, kernel)
    theta_lo = grid.theta_lo if grid.theta_lo is not None else lo
    theta_hi = grid.theta_hi if grid.theta_hi is not None else hi
    thetas = np.linspace(theta_lo, theta_hi, int(grid.n_theta))
    s_obs = float(model.observed_summary[0])
    sd = model.summary_sd
    smoothed = (stats.norm.cdf((s_obs + h - thetas) / sd)
                - stats.norm.cdf((s_obs - h - thetas) / sd)) / (2.0 * h)
    prior = model.prior_density_batch(thetas[:, None])
    return GriddedDensity(thetas, smoothed * prior)


def abc_posterior_montecarlo(model, kernel: SmoothingKernel, theta_grid, metric,
                             n_sims=100_000, seed=0):
    """Simulation-smoothed oracle for fixtures without tractable summaries.

    At each theta node the smoothed likelihood is estimated by the average
    kernel mass over ``n_sims`` simulated summaries.  Unbiased but noisy;
    reserved for the long-running validation tier.
    """
    from .rng import derive_rng_stream

    theta_grid = np.atleast_2d(np.asarray(theta_grid, dtype=float))
    values = np.empty(theta_grid.shape[0])
    s_obs = np.asarray(model.observed_summary, dtype=float)
    for j, theta in enumerate(theta_grid):
        rng = derive_rng_stream(seed, (0, j))
        sims = model.simulate_batch(np.repeat(theta[None, :], n_sims, axis=0), rng)
        d = metric.batch(sims, s_obs)
        values[j] = np.mean(kernel_eval(kernel, d))
    return values * model.prior_density_batch(theta_grid)


# -- registry --------------------------------------------------------------

_REGISTRY = {}


def register_model(name, constructor):
    """Register a model constructor under a unique name."""
    if name in _REGISTRY:
        raise RegistrationError(f"model name {name!r} is already registered")
    if not callable(constructor):
        raise RegistrationError("model constructor must be callable")
    _REGISTRY[name] = constructor
    return constructor


def make_model(name, **params):
    """Construct a registered model from configuration parameters."""
    try:
        constructor = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise RegistrationError(
            f"unknown model name {name!r}; registered: {known}"
        ) from None
    return constructor(**params)


def registered_models():
    return sorted(_REGISTRY)


register_model("normal_mean", NormalMeanModel)
register_model("normal_mean_sd", NormalMeanSdModel)
