import math

import numpy as np
import pytest
from scipy.integrate import quad

from abcmc.errors import ConfigurationError, InvalidInputError
from abcmc.kernels import (
    FAMILIES,
    SmoothingKernel,
    critical_scale,
    kernel_at_zero,
    kernel_eval,
    kernel_log_eval,
)


def test_uniform_values():
    assert kernel_eval(SmoothingKernel("uniform", 1.0), 0.0) == 0.5
    assert kernel_eval(SmoothingKernel("uniform", 2.0), 3.0) == 0.0
    # closed support: the boundary point still counts
    assert kernel_eval(SmoothingKernel("uniform", 2.0), 2.0) == 0.25


def test_gaussian_at_zero():
    val = kernel_eval(SmoothingKernel("gaussian", 1.0), 0.0)
    assert val == pytest.approx(1.0 / math.sqrt(2 * math.pi), abs=1e-12)


def test_epanechnikov_direct():
    # (3/4)(1 - u^2) evaluated directly at u = 0.5
    assert kernel_eval(SmoothingKernel("epanechnikov", 1.0), 0.5) == pytest.approx(
        0.5625, abs=1e-15
    )


def test_kernel_at_zero_values():
    assert kernel_at_zero(SmoothingKernel("uniform", 1.0)) == 0.5
    assert kernel_at_zero(SmoothingKernel("uniform", 0.25)) == 2.0
    assert kernel_at_zero(SmoothingKernel("gaussian", 2.0)) == pytest.approx(
        0.19947114020071635, abs=1e-12
    )


def test_infinite_scale_sentinel_rejected():
    k = SmoothingKernel("uniform", math.inf)
    with pytest.raises(InvalidInputError):
        kernel_at_zero(k)
    with pytest.raises(InvalidInputError):
        kernel_eval(k, 0.5)


def test_non_finite_argument_rejected():
    with pytest.raises(InvalidInputError):
        kernel_eval(SmoothingKernel("uniform", 1.0), math.nan)
    with pytest.raises(InvalidInputError):
        kernel_eval(SmoothingKernel("uniform", 1.0), -0.5)


def test_unknown_family_and_bad_scale():
    with pytest.raises(ConfigurationError):
        SmoothingKernel("cosine", 1.0)
    with pytest.raises(ConfigurationError):
        SmoothingKernel("uniform", 0.0)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("h", [0.1, 1.0, 10.0])
def test_normalisation(family, h):
    k = SmoothingKernel(family, h)
    total, _ = quad(lambda u: kernel_eval(k, abs(u)), -10 * h, 10 * h, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("h", [0.1, 1.0, 10.0])
def test_maximum_at_zero(family, h):
    k = SmoothingKernel(family, h)
    grid = np.linspace(0.0, 12 * h, 500)
    assert np.all(kernel_eval(k, grid) <= kernel_at_zero(k) + 1e-15)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("h", [0.1, 1.0, 10.0])
def test_scale_relation(family, h):
    base = SmoothingKernel(family, 1.0)
    k = SmoothingKernel(family, h)
    grid = np.linspace(0.0, 3 * h, 200)
    np.testing.assert_allclose(
        kernel_eval(k, grid), kernel_eval(base, grid / h) / h, rtol=1e-12
    )


@pytest.mark.parametrize("family", FAMILIES)
def test_log_eval_matches_eval(family):
    k = SmoothingKernel(family, 0.7)
    grid = np.linspace(0.0, 2.0, 101)
    vals = kernel_eval(k, grid)
    logs = kernel_log_eval(k, grid)
    inside = vals > 0
    np.testing.assert_allclose(np.exp(logs[inside]), vals[inside], rtol=1e-12)
    assert np.all(np.isneginf(logs[~inside]))


def test_gaussian_log_eval_no_underflow():
    k = SmoothingKernel("gaussian", 1e-3)
    val = kernel_log_eval(k, np.array([1.0]))[0]
    assert np.isfinite(val) and val < -1e5


@pytest.mark.parametrize("family", ["uniform", "epanechnikov", "triangular"])
def test_critical_scale_inverts_ratio(family):
    rng = np.random.default_rng(0)
    u = rng.uniform(0.01, 3.0, size=200)
    r = rng.uniform(0.01, 0.99, size=200)
    h = critical_scale(family, u, r)
    k0 = np.array([kernel_at_zero(SmoothingKernel(family, hh)) for hh in h])
    vals = np.array(
        [kernel_eval(SmoothingKernel(family, hh), uu) for hh, uu in zip(h, u)]
    )
    # at the critical scale the ratio is exactly met (>= by closed support)
    assert np.all(vals / k0 >= r - 1e-9)
    if family != "uniform":
        shrunk = np.array(
            [kernel_eval(SmoothingKernel(family, hh * 0.999), uu)
             / kernel_at_zero(SmoothingKernel(family, hh * 0.999))
             for hh, uu in zip(h, u)]
        )
        assert np.all(shrunk <= r + 1e-6)


def test_critical_scale_edges():
    assert critical_scale("uniform", 0.0, 0.5) == 0.0
    assert math.isinf(critical_scale("uniform", 1.0, 1.5))
    assert math.isinf(critical_scale("triangular", 1.0, 1.0))
    with pytest.raises(ConfigurationError):
        critical_scale("gaussian", 1.0, 0.5)
