import numpy as np
import pytest

from abcmc.distances import DistanceMetric
from abcmc.errors import (
    ConfigurationError,
    OracleResolutionError,
    RegistrationError,
)
from abcmc.kernels import SmoothingKernel
from abcmc.models import (
    GridSpec,
    NormalMeanModel,
    NormalMeanSdModel,
    abc_posterior_montecarlo,
    abc_posterior_quadrature,
    exact_posterior,
    make_model,
    register_model,
    registered_models,
    uniform_kernel_smoothed_posterior,
)
from abcmc.rng import derive_rng_stream


def test_exact_posterior_canonical():
    mu, sd = exact_posterior(NormalMeanModel.canonical())
    assert mu == pytest.approx(1000.0 / 1001.0, rel=1e-12)
    assert sd**2 == pytest.approx(100.0 / 1001.0, rel=1e-12)


def test_exact_posterior_flat_prior_limit():
    model = NormalMeanModel(n_obs=10, data_sd=1.0, prior_mean=3.0,
                            prior_sd=1e6, observed_summary=1.0)
    mu, sd = exact_posterior(model)
    assert mu == pytest.approx(1.0, abs=1e-9)
    assert sd**2 == pytest.approx(0.1, rel=1e-9)


def test_exact_posterior_no_data_is_prior():
    model = NormalMeanModel(n_obs=0, data_sd=1.0, prior_mean=2.0,
                            prior_sd=3.0, observed_summary=1.0)
    mu, sd = exact_posterior(model)
    assert (mu, sd) == (2.0, 3.0)


def test_summary_distribution(model):
    rng = derive_rng_stream(0, (0, 0))
    sims = model.simulate_batch(np.full((200_000, 1), 1.3), rng)
    assert sims.mean() == pytest.approx(1.3, abs=0.005)
    assert sims.std() == pytest.approx(model.summary_sd, rel=0.02)


def test_prior_density_batch_matches_scalar(model):
    thetas = np.linspace(-20, 20, 7)[:, None]
    batch = model.prior_density_batch(thetas)
    for i, t in enumerate(thetas):
        assert batch[i] == pytest.approx(model.prior_density(t), rel=1e-12)


def test_oracle_small_h_matches_exact_posterior(model):
    mu, sd = exact_posterior(model)
    kernel = SmoothingKernel("gaussian", 1e-4 * sd)
    oracle = abc_posterior_quadrature(model, kernel)
    exact = model.exact_posterior_oracle
    sup = np.max(np.abs(oracle.pdf - exact.pdf(oracle.grid)))
    assert sup / exact.pdf(mu) < 1e-3
    assert oracle.mean() == pytest.approx(mu, abs=1e-6)


def test_oracle_uniform_kernel_closed_form(model):
    oracle = abc_posterior_quadrature(model, SmoothingKernel("uniform", 0.4))
    closed = uniform_kernel_smoothed_posterior(model, 0.4)
    assert np.max(np.abs(oracle.pdf - closed.pdf)) < 1e-8


def test_oracle_large_h_recovers_prior(model):
    kernel = SmoothingKernel("gaussian", 1e6)
    oracle = abc_posterior_quadrature(model, kernel)
    prior_pdf = model.prior_density_batch(oracle.grid[:, None])
    assert np.max(np.abs(oracle.pdf - prior_pdf)) / prior_pdf.max() < 1e-3


def test_oracle_grid_halving_self_consistency(model):
    kernel = SmoothingKernel("gaussian", 0.3)
    coarse = abc_posterior_quadrature(model, kernel,
                                      GridSpec(n_theta=2001, n_s=4001))
    fine = abc_posterior_quadrature(model, kernel,
                                    GridSpec(n_theta=4001, n_s=8001))
    interp = np.interp(fine.grid, coarse.grid, coarse.pdf)
    assert np.max(np.abs(interp - fine.pdf)) < 1e-4


def test_oracle_resolution_guard(model):
    with pytest.raises(OracleResolutionError):
        abc_posterior_quadrature(model, SmoothingKernel("gaussian", 0.3),
                                 GridSpec(n_s=41))
    with pytest.raises(OracleResolutionError):
        abc_posterior_quadrature(model, SmoothingKernel("gaussian", 0.3),
                                 GridSpec(n_theta=51))


def test_oracle_mean_sd_cdf_consistency(model):
    oracle = abc_posterior_quadrature(model, SmoothingKernel("uniform", 0.5))
    assert oracle.cdf(oracle.grid[0]) == 0.0
    assert oracle.cdf(oracle.grid[-1]) == pytest.approx(1.0, abs=1e-12)
    median = oracle.grid[np.searchsorted(oracle.cdf(oracle.grid), 0.5)]
    assert abs(median - oracle.mean()) < 0.05  # near-symmetric fixture


def test_registry_roundtrip():
    model = make_model("normal_mean", n_obs=5, observed_summary=2.0)
    assert isinstance(model, NormalMeanModel)
    assert model.n_obs == 5
    assert "normal_mean" in registered_models()
    with pytest.raises(RegistrationError):
        make_model("no_such_model")
    with pytest.raises(RegistrationError):
        register_model("normal_mean", NormalMeanModel)


def test_two_dim_model_shapes():
    model = NormalMeanSdModel()
    rng = derive_rng_stream(1, (0, 0))
    theta = model.prior_sample(rng)
    assert theta.shape == (2,)
    s = model.simulate_summary(theta, rng)
    assert s.shape == (2,)
    batch = model.simulate_batch(model.prior_sample_batch(rng, 64), rng)
    assert batch.shape == (64, 2)
    assert model.prior_density(theta) > 0
    with pytest.raises(ConfigurationError):
        NormalMeanSdModel(n_obs=1)


def test_two_dim_summary_sampling_law():
    # mean coordinate normal, log-sd coordinate matches a chi-square draw
    model = NormalMeanSdModel(n_obs=20)
    rng = derive_rng_stream(2, (0, 0))
    theta = np.array([0.7, 0.3])
    sims = model.simulate_batch(np.repeat(theta[None, :], 300_000, axis=0), rng)
    sigma = np.exp(0.3)
    assert sims[:, 0].mean() == pytest.approx(0.7, abs=0.005)
    assert sims[:, 0].std() == pytest.approx(sigma / np.sqrt(20), rel=0.02)
    # E[s^2] = sigma^2 for the sample variance
    assert np.exp(2 * sims[:, 1]).mean() == pytest.approx(sigma**2, rel=0.02)


@pytest.mark.long
def test_two_dim_montecarlo_oracle_agrees_with_importance():
    """Simulation-smoothed oracle vs a long importance run on the 2-D fixture."""
    from abcmc.importance import ImportanceConfig, importance_sample
    from abcmc.proposals import PriorProposal

    model = NormalMeanSdModel(n_obs=20, prior_mean=(1.0, 0.0),
                              prior_sd=(1.0, 0.5),
                              observed_summary=(1.0, 0.1))
    metric = DistanceMetric("euclidean")
    kernel = SmoothingKernel("gaussian", 0.25)
    grid_axis = np.linspace(0.0, 2.0, 21)
    grid = np.column_stack([grid_axis, np.full(21, 0.1)])
    vals = abc_posterior_montecarlo(model, kernel, grid, metric,
                                    n_sims=100_000, seed=3)
    cfg = ImportanceConfig(n=400_000, proposal=PriorProposal(model),
                           kernel=kernel, metric=metric)
    res = importance_sample(model, cfg, seed=4)
    w = res.population.normalised_weights
    x = res.population.thetas[:, 0]
    # compare conditional-slice shape via a weighted KDE along theta_1
    sel = np.abs(res.population.thetas[:, 1] - 0.1) < 0.05
    hist, edges = np.histogram(x[sel], bins=grid_axis, weights=w[sel],
                               density=True)
    centres = 0.5 * (edges[1:] + edges[:-1])
    oracle = np.interp(centres, grid_axis, vals / np.trapezoid(vals, grid_axis))
    corr = np.corrcoef(hist, oracle)[0, 1]
    assert corr > 0.95
