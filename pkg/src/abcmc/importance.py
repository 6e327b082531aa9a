"""Importance sampling against the smoothed joint target and its variants:
the plain weighted sampler, the importance/rejection hybrid, early
rejection (propose-gate-then-simulate), rejection control, nearest-
neighbour tolerance selection, and the pointwise marginal-posterior
estimator.

All attempt-driven samplers here share the chunked stream layout of the
rejection module: attempt ``i`` lives in chunk ``i // CHUNK_SIZE``, whose
stream is drawn in the fixed order parameters, summaries, uniforms.
Acceptance decisions are intrinsic to each attempt, so retries can be
assigned to output slots in attempt order without any scheduling
sensitivity.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .diagnostics import RunStatistics
from .errors import (
    BoundViolationError,
    BudgetExhaustedError,
    ConfigurationError,
    ProposalSupportError,
)
from .kernels import SmoothingKernel, kernel_at_zero, kernel_eval
from .population import ParticlePopulation
from .rejection import estimate_sup_ratio
from .rng import CHUNK_SIZE, PHASE_DRAW, map_chunks, stage_id
from .weights import weighted_kernel_mass


@dataclass
class ImportanceConfig:
    """Shared inputs of the importance-family samplers."""

    n: int
    proposal: object
    kernel: SmoothingKernel
    metric: object
    n_replicates: int = 1
    max_attempts_per_particle: int = 1_000_000

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("n must be at least 1")
        if self.n_replicates < 1:
            raise ConfigurationError("n_replicates must be at least 1")
        if self.kernel.is_infinite:
            raise ConfigurationError("importance sampling needs a finite kernel scale")


@dataclass
class RejectionControlConfig:
    """Rejection-control threshold: a fixed ``c`` or a quantile rule.

    Exactly one of the two must be set.  Under the quantile rule the
    threshold is chosen from the empirical weight distribution of a first
    pass over all n particles, then sampling resumes with that threshold.
    """

    base: ImportanceConfig
    threshold: Optional[float] = None
    quantile_rule: Optional[float] = None

    def __post_init__(self):
        if (self.threshold is None) == (self.quantile_rule is None):
            raise ConfigurationError("set exactly one of threshold / quantile_rule")
        if self.threshold is not None and self.threshold <= 0:
            raise ConfigurationError("rejection-control threshold must be positive")
        if self.quantile_rule is not None and not 0 < self.quantile_rule < 1:
            raise ConfigurationError("quantile rule must lie in (0, 1)")


@dataclass
class ImportanceResult:
    population: ParticlePopulation
    statistics: RunStatistics
    m_hat: Optional[float] = None
    tolerance: Optional[float] = None
    tie_count: int = 0


def _chunk_evaluator(model, proposal, metric, n_replicates, draw_uniform):
    """Fixed-order chunk evaluation: thetas, replicate summaries, uniforms."""
    s_obs = np.asarray(model.observed_summary, dtype=float)

    def evaluate(first_index, rng):
        thetas = proposal.sample_batch(rng, CHUNK_SIZE)
        reps = np.stack(
            [model.simulate_batch(thetas, rng) for _ in range(n_replicates)],
            axis=1,
        )  # (B, T, q)
        u = rng.random(CHUNK_SIZE) if draw_uniform else None
        dists = metric.batch(reps, s_obs)  # (B, T)
        prior = model.prior_density_batch(thetas)
        g = proposal.density_batch(thetas)
        return thetas, reps, dists, u, prior, g

    return evaluate


def _check_support(g):
    if np.any(g <= 0):
        raise ProposalSupportError(
            "proposal density returned zero at one of its own draws"
        )


def importance_sample(model, cfg: ImportanceConfig, seed, workers=1):
    """Plain importance sampler: n weighted particles, zero weights kept.

    Weights are ``mean_t K_h(||s(t) - s_obs||) * pi(theta) / g(theta)``;
    normalisation is deferred to consumers so that zero-weight particles
    stay visible to the effective-sample-size diagnostics.
    """
    t0 = time.perf_counter()
    k_fn = lambda d: kernel_eval(cfg.kernel, d)  # noqa: E731
    evaluate = _chunk_evaluator(model, cfg.proposal, cfg.metric,
                                cfg.n_replicates, draw_uniform=False)
    rows = []
    consumed = 0
    for thetas, reps, dists, _, prior, g in map_chunks(
        evaluate, seed, stage_id(0, PHASE_DRAW), workers=workers
    ):
        take = min(CHUNK_SIZE, cfg.n - consumed)
        _check_support(g[:take])
        mass = k_fn(dists[:take]).mean(axis=1)
        w = mass * prior[:take] / g[:take]
        rows.append((thetas[:take], reps[:take], w))
        consumed += take
        if consumed >= cfg.n:
            break
    thetas, reps, w = map(np.concatenate, zip(*rows))
    population = ParticlePopulation(
        thetas=thetas, raw_weights=w, summaries=reps, tolerance=cfg.kernel.scale
    )
    ess = population.ess() if w.sum() > 0 else float("nan")
    stats = RunStatistics(
        simulator_calls=cfg.n * cfg.n_replicates,
        acceptance_rate=1.0,
        wall_time=time.perf_counter() - t0,
        ess_final=ess,
    )
    return ImportanceResult(population=population, statistics=stats,
                            tolerance=cfg.kernel.scale)


def importance_rejection_sample(model, cfg: ImportanceConfig, seed, workers=1):
    """Importance/rejection hybrid: retry each particle until the kernel
    Bernoulli succeeds, then weight by the prior/proposal ratio alone.

    The acceptance event has probability ``mass / K_h(0)``, so with a
    uniform kernel it is the indicator of the summary falling within the
    tolerance, and with a proposal proportional to the prior the output
    weights are constant.
    """
    t0 = time.perf_counter()
    k0 = kernel_at_zero(cfg.kernel)
    evaluate = _chunk_evaluator(model, cfg.proposal, cfg.metric,
                                cfg.n_replicates, draw_uniform=True)
    out_thetas, out_reps, out_w = [], [], []
    n_accepted = 0
    consumed = 0
    attempts_since_accept = 0
    for thetas, reps, dists, u, prior, g in map_chunks(
        evaluate, seed, stage_id(0, PHASE_DRAW), workers=workers
    ):
        _check_support(g)
        mass = kernel_eval(cfg.kernel, dists).mean(axis=1)
        hits = np.flatnonzero(u < mass / k0)
        need = cfg.n - n_accepted
        if hits.size >= need:
            take = hits[:need]
            out_thetas.append(thetas[take])
            out_reps.append(reps[take])
            out_w.append(prior[take] / g[take])
            n_accepted = cfg.n
            consumed += int(take[-1]) + 1
            break
        out_thetas.append(thetas[hits])
        out_reps.append(reps[hits])
        out_w.append(prior[hits] / g[hits])
        n_accepted += hits.size
        consumed += CHUNK_SIZE
        # retry budget: attempts elapsed since the most recent acceptance
        if hits.size:
            attempts_since_accept = CHUNK_SIZE - int(hits[-1]) - 1
        else:
            attempts_since_accept += CHUNK_SIZE
        if attempts_since_accept > cfg.max_attempts_per_particle:
            raise BudgetExhaustedError(
                f"particle {n_accepted} exceeded "
                f"{cfg.max_attempts_per_particle} attempts without acceptance"
            )
    thetas, reps, w = map(np.concatenate, (out_thetas, out_reps, out_w))
    population = ParticlePopulation(
        thetas=thetas, raw_weights=w, summaries=reps, tolerance=cfg.kernel.scale
    )
    stats = RunStatistics(
        simulator_calls=consumed * cfg.n_replicates,
        acceptance_rate=cfg.n / consumed,
        wall_time=time.perf_counter() - t0,
        ess_final=population.ess(),
    )
    return ImportanceResult(population=population, statistics=stats,
                            tolerance=cfg.kernel.scale)


def early_rejection_importance_sample(model, cfg: ImportanceConfig, seed,
                                      workers=1):
    """Importance/rejection with the acceptance factors swapped so the
    cheap prior/proposal gate runs before any simulation.

    Each attempt first passes a Bernoulli gate with probability
    ``pi(theta) / (kappa g(theta))`` (``kappa`` is the pilot-estimated
    supremum of the ratio); only gate survivors are simulated, and each
    survivor becomes a particle weighted by ``mass / K_h(0)``.  Targets the
    same smoothed posterior as the hybrid sampler with different weight
    variance; saves simulations exactly when the proposal is wider than
    the prior.
    """
    t0 = time.perf_counter()
    k0 = kernel_at_zero(cfg.kernel)
    kappa = estimate_sup_ratio(model, cfg.proposal, seed)
    s_obs = np.asarray(model.observed_summary, dtype=float)

    def evaluate(first_index, rng):
        thetas = cfg.proposal.sample_batch(rng, CHUNK_SIZE)
        u = rng.random(CHUNK_SIZE)
        prior = model.prior_density_batch(thetas)
        g = cfg.proposal.density_batch(thetas)
        _check_support(g)
        gate = prior / (kappa * g)
        if np.any(gate > 1.0 + 1e-9):
            raise BoundViolationError(
                f"early-rejection gate probability {gate.max():.6g} exceeds 1; "
                "the prior/proposal bound is too small"
            )
        passers = np.flatnonzero(u < gate)
        if passers.size:
            reps = np.stack(
                [model.simulate_batch(thetas[passers], rng)
                 for _ in range(cfg.n_replicates)],
                axis=1,
            )
        else:
            reps = np.empty((0, cfg.n_replicates, model.summary_dim))
        dists = cfg.metric.batch(reps, s_obs)
        return thetas, passers, reps, dists

    out_thetas, out_reps, out_w = [], [], []
    n_done = 0
    consumed = 0
    sim_calls = 0
    attempts_since_accept = 0
    for thetas, passers, reps, dists in map_chunks(
        evaluate, seed, stage_id(0, PHASE_DRAW), workers=workers
    ):
        mass = (kernel_eval(cfg.kernel, dists).mean(axis=1)
                if passers.size else np.empty(0))
        need = cfg.n - n_done
        if passers.size >= need:
            out_thetas.append(thetas[passers[:need]])
            out_reps.append(reps[:need])
            out_w.append(mass[:need] / k0)
            sim_calls += need * cfg.n_replicates
            consumed += int(passers[need - 1]) + 1
            n_done = cfg.n
            break
        out_thetas.append(thetas[passers])
        out_reps.append(reps)
        out_w.append(mass / k0)
        sim_calls += passers.size * cfg.n_replicates
        n_done += passers.size
        consumed += CHUNK_SIZE
        if passers.size:
            attempts_since_accept = CHUNK_SIZE - int(passers[-1]) - 1
        else:
            attempts_since_accept += CHUNK_SIZE
        if attempts_since_accept > cfg.max_attempts_per_particle:
            raise BudgetExhaustedError(
                f"particle {n_done} exceeded "
                f"{cfg.max_attempts_per_particle} attempts at the prior gate"
            )
    thetas, reps, w = map(np.concatenate, (out_thetas, out_reps, out_w))
    population = ParticlePopulation(
        thetas=thetas, raw_weights=w, summaries=reps, tolerance=cfg.kernel.scale
    )
    ess = population.ess() if w.sum() > 0 else float("nan")
    stats = RunStatistics(
        simulator_calls=sim_calls,
        acceptance_rate=cfg.n / consumed,
        wall_time=time.perf_counter() - t0,
        ess_final=ess,
    )
    return ImportanceResult(population=population, statistics=stats,
                            tolerance=cfg.kernel.scale)


def _rc_acceptance(w, c):
    """min(1, w / c) with the c -> 0 convention 0/0 := 1."""
    if c <= 0.0:
        return np.ones_like(w)
    return np.minimum(1.0, w / c)


def rejection_control_sample(model, cfg: RejectionControlConfig, seed,
                             workers=1):
    """Rejection-control importance sampling.

    Low-weight particles are probabilistically culled (acceptance
    ``min(1, w/c)``) and survivors are reweighted to ``w / r``, i.e.
    ``max(w, c)``, which caps the weight variance from below.  Under the
    quantile rule the threshold is the configured quantile of a first pass
    over all n particle weights; the first-pass draws are then resumed,
    not discarded.  Returns the normalising-constant estimate ``m_hat``,
    the average acceptance probability over all attempts.
    """
    t0 = time.perf_counter()
    base = cfg.base
    evaluate = _chunk_evaluator(model, base.proposal, base.metric,
                                base.n_replicates, draw_uniform=True)
    out_thetas, out_reps, out_w = [], [], []
    n_accepted = 0
    consumed = 0
    rc_sum = 0.0
    threshold = cfg.threshold
    first_pass = None  # rows of the two-pass quantile variant
    attempts_since_accept = 0
    for thetas, reps, dists, u, prior, g in map_chunks(
        evaluate, seed, stage_id(0, PHASE_DRAW), workers=workers
    ):
        _check_support(g)
        mass = kernel_eval(base.kernel, dists).mean(axis=1)
        w = mass * prior / g
        start = 0
        if threshold is None:
            # first pass: collect exactly n candidate weights, then fix c
            have = 0 if first_pass is None else sum(r[2].size for r in first_pass)
            take = min(CHUNK_SIZE, base.n - have)
            row = (thetas[:take], reps[:take], w[:take], u[:take])
            first_pass = (first_pass or []) + [row]
            if take < CHUNK_SIZE or have + take == base.n:
                all_w = np.concatenate([r[2] for r in first_pass])
                threshold = float(np.quantile(all_w, cfg.quantile_rule))
                # resume from the stored candidates with the chosen c
                for fp_thetas, fp_reps, fp_w, fp_u in first_pass:
                    r = _rc_acceptance(fp_w, threshold)
                    rc_sum += float(r.sum())
                    consumed += fp_w.size
                    keep = np.flatnonzero(fp_u < r)
                    out_thetas.append(fp_thetas[keep])
                    out_reps.append(fp_reps[keep])
                    out_w.append(fp_w[keep] / r[keep])
                    n_accepted += keep.size
                first_pass = []
                start = take  # unused remainder of this chunk feeds retries
                if n_accepted >= base.n:
                    break
            else:
                continue
        r = _rc_acceptance(w[start:], threshold)
        hits = np.flatnonzero(u[start:] < r)
        need = base.n - n_accepted
        if hits.size >= need:
            cut = hits[:need]
            rc_sum += float(r[: cut[-1] + 1].sum())
            consumed += int(cut[-1]) + 1
            out_thetas.append(thetas[start:][cut])
            out_reps.append(reps[start:][cut])
            out_w.append(w[start:][cut] / r[cut])
            n_accepted = base.n
            break
        rc_sum += float(r.sum())
        consumed += r.size
        out_thetas.append(thetas[start:][hits])
        out_reps.append(reps[start:][hits])
        out_w.append(w[start:][hits] / r[hits])
        n_accepted += hits.size
        if hits.size:
            attempts_since_accept = r.size - int(hits[-1]) - 1
        else:
            attempts_since_accept += r.size
        if attempts_since_accept > base.max_attempts_per_particle:
            raise BudgetExhaustedError(
                f"particle {n_accepted} exceeded "
                f"{base.max_attempts_per_particle} rejection-control retries"
            )
    thetas, reps, w_star = map(np.concatenate, (out_thetas, out_reps, out_w))
    population = ParticlePopulation(
        thetas=thetas, raw_weights=w_star, summaries=reps,
        tolerance=base.kernel.scale,
    )
    m_hat = rc_sum / consumed
    ess = population.ess() if w_star.sum() > 0 else float("nan")
    stats = RunStatistics(
        simulator_calls=consumed * base.n_replicates,
        acceptance_rate=base.n / consumed,
        wall_time=time.perf_counter() - t0,
        ess_final=ess,
    )
    return ImportanceResult(population=population, statistics=stats,
                            m_hat=m_hat, tolerance=base.kernel.scale)


def knn_importance_sample(model, n_total, n_keep, proposal, kernel_family,
                          metric, seed, workers=1):
    """Nearest-neighbour importance sampling with data-driven tolerance.

    Simulates exactly ``n_total`` (theta, summary) pairs, keeps the
    ``n_keep`` summaries nearest the observation, and sets the kernel
    scale to the ``n_keep``-th smallest distance (closed support keeps the
    boundary particle's weight positive for the uniform family).  The
    output depends only on the seed and the sizes, never on scheduling;
    ties at the cut are kept in attempt order and counted.
    """
    t0 = time.perf_counter()
    if n_total < n_keep:
        raise ConfigurationError("n_total must be at least n_keep")
    if n_keep < 1:
        raise ConfigurationError("n_keep must be at least 1")
    if not SmoothingKernel(kernel_family, 1.0).compact_support:
        raise ConfigurationError(
            "nearest-neighbour tolerance needs a compact-support kernel"
        )
    evaluate = _chunk_evaluator(model, proposal, metric, 1, draw_uniform=True)
    rows = []
    consumed = 0
    for thetas, reps, dists, _, prior, g in map_chunks(
        evaluate, seed, stage_id(0, PHASE_DRAW), workers=workers
    ):
        take = min(CHUNK_SIZE, n_total - consumed)
        _check_support(g[:take])
        rows.append((thetas[:take], reps[:take], dists[:take, 0],
                     prior[:take], g[:take]))
        consumed += take
        if consumed >= n_total:
            break
    thetas, reps, dists, prior, g = map(np.concatenate, zip(*rows))
    order = np.argsort(dists, kind="stable")
    keep = order[:n_keep]
    h = float(dists[keep[-1]])
    tie_count = int(np.sum(dists == h) - np.sum(dists[keep] == h))
    kernel = SmoothingKernel(kernel_family, h if h > 0 else np.finfo(float).tiny)
    w = kernel_eval(kernel, dists[keep]) * prior[keep] / g[keep]
    population = ParticlePopulation(
        thetas=thetas[keep], raw_weights=w, summaries=reps[keep], tolerance=h
    )
    stats = RunStatistics(
        simulator_calls=n_total,
        acceptance_rate=n_keep / n_total,
        wall_time=time.perf_counter() - t0,
        ess_final=population.ess(),
    )
    return ImportanceResult(population=population, statistics=stats,
                            tolerance=h, tie_count=tie_count)


def marginal_posterior_estimate(model, theta, s_obs, kernel, metric,
                                n_replicates, rng):
    """Unbiased (up to proportionality) pointwise estimate of the smoothed
    posterior: ``pi(theta) * mean_t K_h(||s(t) - s_obs||)``.

    A zero-prior point returns zero without spending simulations.
    """
    if n_replicates < 1:
        raise ConfigurationError("n_replicates must be at least 1")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    prior = model.prior_density(theta)
    if prior == 0.0:
        return 0.0
    reps = model.simulate_replicates(theta, n_replicates, rng)
    return prior * weighted_kernel_mass(kernel, metric, reps, s_obs)
