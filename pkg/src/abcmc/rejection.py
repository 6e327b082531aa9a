"""Rejection sampling against the smoothed joint target, plus the
budget-constrained variant that discovers its own tolerance.

Attempts are laid out in fixed-size chunks, each drawing from its own
derived random stream in a fixed order (parameters, summaries, acceptance
uniforms).  Acceptance of an attempt depends only on its own draws, so the
accepted set is identical however chunks are scheduled, and a run that
records all attempts (the auto-tolerance variant) accepts exactly the same
parameters as a plain run replayed at the discovered tolerance.
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
)
from .kernels import SmoothingKernel, critical_scale, kernel_at_zero, kernel_eval
from .rng import (
    CHUNK_SIZE,
    PHASE_DRAW,
    PHASE_PILOT,
    derive_rng_stream,
    map_chunks,
    stage_id,
)

PILOT_SIZE = 10_000
SUP_RATIO_INFLATION = 1.1


def estimate_sup_ratio(model, proposal, seed, n_pilot=PILOT_SIZE,
                       inflation=SUP_RATIO_INFLATION):
    """Estimate ``sup_theta pi(theta) / g(theta)`` from a pilot batch.

    The maximum over the pilot draws is inflated by 10% as a safety margin,
    except when the ratio is constant over the pilot (g proportional to the
    prior), in which case the supremum is known exactly and returned as is.
    """
    rng = derive_rng_stream(seed, (stage_id(0, PHASE_PILOT), 0))
    thetas = proposal.sample_batch(rng, n_pilot)
    g = proposal.density_batch(thetas)
    if np.any(g <= 0):
        raise BoundViolationError("proposal density is zero at its own draw")
    ratio = model.prior_density_batch(thetas) / g
    top = float(ratio.max())
    if top <= 0:
        raise BoundViolationError("prior density is zero on the whole pilot batch")
    if np.isclose(top, float(ratio.min()), rtol=1e-9):
        return top
    return inflation * top


@dataclass
class RejectionConfig:
    """Inputs of the rejection sampler.

    ``m_bound`` is the envelope constant M; when omitted it defaults to
    ``K_h(0)`` times the pilot-estimated prior/proposal supremum.  Supplying
    a too-small M raises rather than clips: clipping would silently bias
    the target.
    """

    n: int
    proposal: object
    kernel: SmoothingKernel
    metric: object
    m_bound: Optional[float] = None
    max_attempts: int = 10_000_000

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("n must be at least 1")
        if self.kernel.is_infinite:
            raise ConfigurationError("rejection sampling needs a finite kernel scale")
        if self.max_attempts < self.n:
            raise ConfigurationError("max_attempts smaller than requested sample size")


@dataclass
class RejectionResult:
    samples: np.ndarray  # (n, d)
    summaries: np.ndarray  # (n, q)
    statistics: RunStatistics
    m_bound: float
    tolerance: float
    tie_count: int = 0


def _evaluate_chunk(model, proposal, s_obs, metric, n_replicates=1):
    """Build the chunk evaluator shared by this module's samplers.

    Draw order per chunk stream is fixed: parameters, summaries, then one
    acceptance uniform per attempt.  Everything downstream is a pure
    function of these arrays.
    """

    def evaluate(first_index, rng):
        thetas = proposal.sample_batch(rng, CHUNK_SIZE)
        sims = model.simulate_batch(thetas, rng)
        u = rng.random(CHUNK_SIZE)
        dists = metric.batch(sims, s_obs)
        prior = model.prior_density_batch(thetas)
        g = proposal.density_batch(thetas)
        return thetas, sims, dists, u, prior, g

    return evaluate


def rejection_sample(model, cfg: RejectionConfig, seed, workers=1):
    """Draw ``cfg.n`` independent samples from the smoothed posterior.

    Each proposal is accepted with probability
    ``K_h(||s - s_obs||) pi(theta) / (M g(theta))``; a computed acceptance
    probability above one means M was too small and raises
    :class:`BoundViolationError`.
    """
    t0 = time.perf_counter()
    s_obs = np.asarray(model.observed_summary, dtype=float)
    k0 = kernel_at_zero(cfg.kernel)
    if cfg.m_bound is not None:
        m_bound = float(cfg.m_bound)
        if m_bound <= 0:
            raise ConfigurationError("m_bound must be positive")
    else:
        m_bound = k0 * estimate_sup_ratio(model, cfg.proposal, seed)

    evaluate = _evaluate_chunk(model, cfg.proposal, s_obs, cfg.metric)
    accepted_thetas = []
    accepted_summaries = []
    n_accepted = 0
    consumed = 0
    for thetas, sims, dists, u, prior, g in map_chunks(
        evaluate, seed, stage_id(0, PHASE_DRAW), workers=workers
    ):
        if np.any(g <= 0):
            raise BoundViolationError("proposal density is zero at its own draw")
        p_accept = kernel_eval(cfg.kernel, dists) * prior / (m_bound * g)
        if np.any(p_accept > 1.0 + 1e-9):
            raise BoundViolationError(
                f"acceptance probability {p_accept.max():.6g} exceeds 1; "
                "the envelope constant M is too small"
            )
        accept = u < p_accept
        hits = np.flatnonzero(accept)
        need = cfg.n - n_accepted
        if hits.size >= need:
            last = hits[need - 1]
            accepted_thetas.append(thetas[hits[:need]])
            accepted_summaries.append(sims[hits[:need]])
            consumed += last + 1
            n_accepted = cfg.n
            break
        accepted_thetas.append(thetas[hits])
        accepted_summaries.append(sims[hits])
        n_accepted += hits.size
        consumed += CHUNK_SIZE
        if consumed >= cfg.max_attempts:
            raise BudgetExhaustedError(
                f"rejection sampler used {consumed} attempts for "
                f"{n_accepted}/{cfg.n} acceptances"
            )
    stats = RunStatistics(
        simulator_calls=int(consumed),
        acceptance_rate=cfg.n / consumed,
        wall_time=time.perf_counter() - t0,
        ess_final=float(cfg.n),
    )
    return RejectionResult(
        samples=np.concatenate(accepted_thetas),
        summaries=np.concatenate(accepted_summaries),
        statistics=stats,
        m_bound=m_bound,
        tolerance=cfg.kernel.scale,
    )


def rejection_sample_auto_h(model, n, budget, proposal, kernel_family, metric,
                            seed, workers=1):
    """Budget-constrained rejection with automatically determined tolerance.

    Spends exactly ``budget`` simulations, then returns the ``n`` samples
    that would be accepted under the smallest tolerance admitting exactly
    ``n`` acceptances, together with that tolerance.  With a proposal
    proportional to the prior and a uniform kernel this keeps the ``n``
    summaries nearest the observation.

    Requires a compact-support family; ties at the cut are kept in attempt
    order and reported via ``tie_count``.
    """
    t0 = time.perf_counter()
    if budget < n:
        raise ConfigurationError("budget must be at least the sample size n")
    kernel_probe = SmoothingKernel(kernel_family, 1.0)
    if not kernel_probe.compact_support:
        raise ConfigurationError("automatic tolerance needs a compact-support kernel")
    s_obs = np.asarray(model.observed_summary, dtype=float)
    sup_ratio = estimate_sup_ratio(model, proposal, seed)

    evaluate = _evaluate_chunk(model, proposal, s_obs, metric)
    rows = []
    consumed = 0
    for thetas, sims, dists, u, prior, g in map_chunks(
        evaluate, seed, stage_id(0, PHASE_DRAW), workers=workers
    ):
        take = min(CHUNK_SIZE, budget - consumed)
        rows.append((thetas[:take], sims[:take], dists[:take], u[:take],
                     prior[:take], g[:take]))
        consumed += take
        if consumed >= budget:
            break
    thetas, sims, dists, u, prior, g = map(np.concatenate, zip(*rows))

    # tolerance at which each attempt would first be accepted: the Bernoulli
    # test u < [K(d/h)/K(0)] * pi/(kappa g) holds iff h >= critical scale
    with np.errstate(divide="ignore", invalid="ignore"):
        required = u * sup_ratio * g / prior
    required = np.where(prior > 0, required, np.inf)
    h_crit = critical_scale(kernel_family, dists, required)
    finite = np.isfinite(h_crit)
    if finite.sum() < n:
        raise BudgetExhaustedError(
            f"only {int(finite.sum())} of {budget} attempts can be accepted at "
            f"any tolerance; increase the budget"
        )
    order = np.argsort(h_crit, kind="stable")
    h = float(h_crit[order[n - 1]])
    # output in attempt order: exactly what a plain run at tolerance h accepts
    keep = np.sort(order[:n])
    tie_count = int(np.sum(h_crit == h) - np.sum(h_crit[keep] == h))
    stats = RunStatistics(
        simulator_calls=int(budget),
        acceptance_rate=n / budget,
        wall_time=time.perf_counter() - t0,
        ess_final=float(n),
    )
    return RejectionResult(
        samples=thetas[keep],
        summaries=sims[keep],
        statistics=stats,
        m_bound=kernel_at_zero(SmoothingKernel(kernel_family, h)) * sup_ratio,
        tolerance=h,
        tie_count=tie_count,
    )
