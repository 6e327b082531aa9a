"""Execute a validated run configuration and write its artifacts."""

from __future__ import annotations

import math
import os

import numpy as np

from . import __version__
from .diagnostics import weighted_moments, weighted_quantile
from .distances import DistanceMetric
from .errors import ConfigurationError
from .importance import (
    ImportanceConfig,
    RejectionControlConfig,
    early_rejection_importance_sample,
    importance_rejection_sample,
    importance_sample,
    knn_importance_sample,
    rejection_control_sample,
)
from .kernels import SmoothingKernel
from .mcmc import (
    TruncatedExponentialPrior,
    abc_mcmc,
    abc_mcmc_race,
    abc_mcmc_regenerate,
    augmented_scale_mcmc,
)
from .models import make_model
from .proposals import (
    GaussianRandomWalk,
    IndependentNormalProposal,
    LogScaleRandomWalk,
    MixtureProposal,
    PriorProposal,
)
from .rejection import RejectionConfig, rejection_sample, rejection_sample_auto_h
from .resultsio import (
    write_diagnostics,
    write_manifest,
    write_samples,
    write_stage_log,
    write_trace,
)
from .runconfig import RunConfiguration, render_config
from .smc import SisConfig, SmcConfig, adaptive_smc, sis_rejection_control


def build_model(cfg: RunConfiguration):
    name = cfg.get("model", "name")
    sec = cfg.sections["model"]
    if name == "normal_mean":
        return make_model(
            "normal_mean",
            n_obs=sec["n_obs"],
            data_sd=sec["data_sd"],
            prior_mean=sec["prior_mean"][0],
            prior_sd=sec["prior_sd"][0],
            observed_summary=sec["observed_summary"][0],
        )
    if name == "normal_mean_sd":
        def pair(key):
            v = sec[key]
            return v if len(v) == 2 else [v[0], v[0]]
        return make_model(
            "normal_mean_sd",
            n_obs=sec["n_obs"],
            prior_mean=pair("prior_mean"),
            prior_sd=pair("prior_sd"),
            observed_summary=pair("observed_summary"),
        )
    raise ConfigurationError(f"model {name!r} not configurable from files")


def build_metric(cfg: RunConfiguration):
    kind = cfg.get("metric", "kind")
    if kind == "euclidean":
        return DistanceMetric("euclidean")
    if kind == "weighted_euclidean":
        return DistanceMetric("weighted_euclidean",
                              weights=cfg.get("metric", "weights"))
    entries = cfg.get("metric", "matrix")
    q = int(round(math.sqrt(len(entries))))
    if q * q != len(entries):
        raise ConfigurationError("metric matrix entries do not form a square")
    return DistanceMetric("mahalanobis",
                          matrix=np.array(entries).reshape(q, q))


def build_proposal(cfg: RunConfiguration, model):
    kind = cfg.get("proposal", "kind")
    if kind == "prior":
        return PriorProposal(model)
    mean = cfg.get("proposal", "mean")
    sd = cfg.get("proposal", "sd")
    if len(mean) == 1 and model.param_dim > 1:
        mean = mean * model.param_dim
    if len(sd) == 1 and model.param_dim > 1:
        sd = sd * model.param_dim
    normal = IndependentNormalProposal(mean, sd)
    if kind == "normal":
        return normal
    w = cfg.get("proposal", "prior_weight")
    return MixtureProposal([w, 1.0 - w], [PriorProposal(model), normal])


def build_kernel(cfg: RunConfiguration):
    return SmoothingKernel(cfg.get("kernel", "family"), cfg.get("kernel", "h"))


def _move_proposal(cfg, model):
    return GaussianRandomWalk(
        scale=[cfg.get("sampler", "move_scale")] * model.param_dim
    )


def _init_theta(cfg):
    v = cfg.get("sampler", "init_theta")
    return None if v is None else np.asarray(v, dtype=float)


class RunOutput:
    """In-memory artifacts of a finished run."""

    def __init__(self, thetas, raw_weights, normalised_weights, statistics,
                 trace=None, stages=None, extra=None):
        self.thetas = np.atleast_2d(thetas)
        self.raw_weights = np.asarray(raw_weights, dtype=float)
        self.normalised_weights = np.asarray(normalised_weights, dtype=float)
        self.statistics = statistics
        self.trace = trace
        self.stages = stages
        self.extra = extra or {}


def _from_population(population, statistics, stages=None, extra=None):
    return RunOutput(
        thetas=population.thetas,
        raw_weights=population.raw_weights,
        normalised_weights=population.normalised_weights,
        statistics=statistics,
        stages=stages,
        extra=extra,
    )


def _from_trace(trace, burn_in, extra=None):
    thetas = trace.thetas[burn_in:]
    n = thetas.shape[0]
    return RunOutput(
        thetas=thetas,
        raw_weights=np.ones(n),
        normalised_weights=np.full(n, 1.0 / n),
        statistics=trace.statistics,
        trace=trace,
        extra=extra,
    )


def execute(cfg: RunConfiguration, workers=1):
    """Dispatch on the configured sampler; returns a :class:`RunOutput`."""
    model = build_model(cfg)
    metric = build_metric(cfg)
    seed = cfg.seed
    s = cfg.sections["sampler"]
    sampler = cfg.sampler

    if sampler == "rejection":
        rc = RejectionConfig(
            n=s["n"], proposal=build_proposal(cfg, model),
            kernel=build_kernel(cfg), metric=metric,
            m_bound=s["m_bound"], max_attempts=s["max_attempts"],
        )
        res = rejection_sample(model, rc, seed, workers=workers)
        n = res.samples.shape[0]
        return RunOutput(res.samples, np.ones(n), np.full(n, 1.0 / n),
                         res.statistics, extra={"h": res.tolerance,
                                                "m_bound": res.m_bound})

    if sampler == "rejection_auto_h":
        res = rejection_sample_auto_h(
            model, s["n"], s["n_total"], build_proposal(cfg, model),
            cfg.get("kernel", "family"), metric, seed, workers=workers,
        )
        n = res.samples.shape[0]
        return RunOutput(res.samples, np.ones(n), np.full(n, 1.0 / n),
                         res.statistics,
                         extra={"h": res.tolerance, "tie_count": res.tie_count})

    imp_cfg = None
    if sampler in ("importance", "importance_rejection", "rejection_control"):
        imp_cfg = ImportanceConfig(
            n=s["n"], proposal=build_proposal(cfg, model),
            kernel=build_kernel(cfg), metric=metric,
            n_replicates=s["n_replicates"],
            max_attempts_per_particle=s["max_attempts_per_particle"],
        )

    if sampler == "importance":
        res = importance_sample(model, imp_cfg, seed, workers=workers)
        return _from_population(res.population, res.statistics,
                                extra={"h": res.tolerance})

    if sampler == "importance_rejection":
        res = importance_rejection_sample(model, imp_cfg, seed, workers=workers)
        return _from_population(res.population, res.statistics,
                                extra={"h": res.tolerance})

    if sampler == "rejection_control":
        rcc = RejectionControlConfig(
            base=imp_cfg, threshold=s["threshold_c"], quantile_rule=s["quantile"],
        )
        res = rejection_control_sample(model, rcc, seed, workers=workers)
        return _from_population(res.population, res.statistics,
                                extra={"h": res.tolerance, "m_hat": res.m_hat})

    if sampler == "knn":
        res = knn_importance_sample(
            model, s["n_total"], s["n"], build_proposal(cfg, model),
            cfg.get("kernel", "family"), metric, seed, workers=workers,
        )
        return _from_population(res.population, res.statistics,
                                extra={"h": res.tolerance,
                                       "tie_count": res.tie_count})

    if sampler in ("mcmc", "mcmc_method2", "mcmc_method3"):
        kernel = build_kernel(cfg)
        proposal = _move_proposal(cfg, model)
        if sampler == "mcmc":
            trace = abc_mcmc(
                model, proposal, kernel, metric, s["iterations"],
                n_replicates=s["n_replicates"],
                init_max_tries=s["init_max_tries"], seed=seed,
                init_theta=_init_theta(cfg),
            )
        elif sampler == "mcmc_method2":
            trace = abc_mcmc_regenerate(
                model, proposal, kernel, metric, s["iterations"],
                n_replicates=s["n_replicates"], seed=seed,
                init_theta=_init_theta(cfg),
            )
        else:
            trace = abc_mcmc_race(
                model, proposal, kernel, metric, s["iterations"],
                per_iter_sim_cap=s["per_iter_sim_cap"], seed=seed,
                init_theta=_init_theta(cfg),
            )
        return _from_trace(trace, s["burn_in"], extra={"h": kernel.scale})

    if sampler == "augmented_mcmc":
        scale_prior = TruncatedExponentialPrior(
            rate=s["h_prior_rate"], h_max=s["h_max"]
        )
        trace = augmented_scale_mcmc(
            model, _move_proposal(cfg, model),
            LogScaleRandomWalk(s["h_move_scale"]), scale_prior,
            cfg.get("kernel", "family"), metric, s["iterations"],
            h_init=s["h_init"], n_replicates=s["n_replicates"],
            init_max_tries=s["init_max_tries"], seed=seed,
            init_theta=_init_theta(cfg), update=s["update"],
        )
        return _from_trace(trace, s["burn_in"],
                           extra={"h_final": float(trace.tolerance[-1])})

    if sampler == "sis_rc":
        sis = SisConfig(
            n=s["n"], h_schedule=cfg.get("kernel", "schedule"),
            kernel_family=cfg.get("kernel", "family"), metric=metric,
            initial_proposal=build_proposal(cfg, model),
            c_values=s["c_values"], c_quantile=s["c_quantile"],
            proposal_strategy=s["proposal_strategy"],
        )
        res = sis_rejection_control(model, sis, seed, workers=workers)
        return _from_population(res.population, res.statistics,
                                stages=res.stages,
                                extra={"h": res.population.tolerance})

    if sampler == "adaptive_smc":
        smc = SmcConfig(
            n=s["n"], alpha=s["alpha"],
            kernel_family=cfg.get("kernel", "family"), metric=metric,
            initial_proposal=build_proposal(cfg, model),
            n_replicates=s["n_replicates"],
            resample_threshold=s["resample_threshold"],
            resampling_scheme=s["resampling_scheme"],
            min_move_rate=s["min_move_rate"], min_h=s["min_h"],
            max_stages=s["max_stages"], moves_per_stage=s["moves_per_stage"],
        )
        res = adaptive_smc(model, smc, seed, workers=workers)
        return _from_population(
            res.population, res.statistics, stages=res.stages,
            extra={"h": res.population.tolerance,
                   "stop_reason": res.stop_reason,
                   "initial_ess": res.initial_ess},
        )

    raise ConfigurationError(f"unknown sampler {sampler!r}")


def diagnostics_entries(output: RunOutput):
    stats = output.statistics
    entries = {
        "simulator_calls": stats.simulator_calls,
        "acceptance_rate": stats.acceptance_rate,
        "wall_time_seconds": stats.wall_time,
        "ess_final": stats.ess_final,
    }
    try:
        mean, cov = weighted_moments(output.thetas, output.raw_weights)
        sds = np.sqrt(np.clip(np.diag(cov), 0.0, np.inf))
        for j in range(output.thetas.shape[1]):
            entries[f"mean_theta_{j}"] = float(mean[j])
            entries[f"sd_theta_{j}"] = float(sds[j])
            for p in (0.05, 0.5, 0.95):
                entries[f"q{int(p * 100):02d}_theta_{j}"] = weighted_quantile(
                    output.thetas, j, p, weights=output.raw_weights
                )
    except Exception as exc:  # degenerate populations still get core stats
        entries["moment_error"] = f"{type(exc).__name__}: {exc}"
    for key, value in output.extra.items():
        entries[key] = value
    return entries


def write_artifacts(cfg: RunConfiguration, output: RunOutput, out_dir,
                    quiet=False):
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    samples_path = os.path.join(out_dir, "samples.csv")
    write_samples(samples_path, output.thetas, output.raw_weights,
                  output.normalised_weights)
    paths["samples"] = samples_path
    diag_path = os.path.join(out_dir, "diagnostics.txt")
    write_diagnostics(diag_path, diagnostics_entries(output))
    paths["diagnostics"] = diag_path
    if output.trace is not None:
        trace_path = os.path.join(out_dir, "trace.csv")
        write_trace(trace_path, output.trace)
        paths["trace"] = trace_path
    if output.stages is not None:
        stage_path = os.path.join(out_dir, "stages.csv")
        write_stage_log(stage_path, output.stages)
        paths["stages"] = stage_path
    manifest_path = os.path.join(out_dir, "manifest.cfg")
    write_manifest(
        manifest_path,
        f"# abcmc {__version__} resolved run configuration\n"
        + render_config(cfg),
    )
    paths["manifest"] = manifest_path
    if not quiet:
        for name, path in paths.items():
            print(f"{name}: {path}")
    return paths
