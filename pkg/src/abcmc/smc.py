"""Population samplers: sequential rejection-control importance sampling
over a fixed tolerance ladder, and the adaptive sampler that chooses each
tolerance to shrink the effective sample size by a fixed factor, resampling
and rejuvenating with MCMC moves as it goes.

Stage ``m`` draws from streams keyed by ``(stage_id(m, phase), index)``;
within a stage the same chunked attempt layout as the importance module
applies, so results are independent of worker scheduling.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .diagnostics import RunStatistics, weighted_moments
from .errors import (
    ConfigurationError,
    DegeneratePopulationError,
    ProposalSupportError,
    ScheduleStallError,
    StageFailureError,
)
from .kernels import SmoothingKernel, kernel_eval, kernel_log_eval
from .population import ParticlePopulation
from .proposals import GaussianRandomWalk, Proposal
from .rng import (
    CHUNK_SIZE,
    PHASE_DRAW,
    PHASE_INIT,
    PHASE_MOVE,
    PHASE_RESAMPLE,
    derive_rng_stream,
    map_chunks,
    stage_id,
)
from .weights import ess_from_log_weights, normalised_from_log_weights

RESAMPLING_SCHEMES = ("multinomial", "systematic")


# -- resampling -------------------------------------------------------------


def resample_indices(normalised_weights, scheme, rng):
    """Ancestor indices under the multinomial or systematic scheme.

    Both schemes give offspring counts with expectation ``N * W_i``;
    systematic stratifies the uniforms for lower variance.
    """
    w = np.asarray(normalised_weights, dtype=float)
    n = w.size
    if scheme == "multinomial":
        return rng.choice(n, size=n, p=w)
    if scheme == "systematic":
        positions = (rng.random() + np.arange(n)) / n
        return np.minimum(
            np.searchsorted(np.cumsum(w), positions, side="left"), n - 1
        )
    raise ConfigurationError(
        f"unknown resampling scheme {scheme!r}; choose from {RESAMPLING_SCHEMES}"
    )


def resample(population: ParticlePopulation, scheme, rng):
    """Resampled population with uniform weights (ESS reset to N)."""
    idx = resample_indices(population.normalised_weights, scheme, rng)
    n = len(population)
    return ParticlePopulation(
        thetas=population.thetas[idx],
        raw_weights=np.full(n, 1.0 / n),
        summaries=None if population.summaries is None
        else population.summaries[idx],
        tolerance=population.tolerance,
    )


# -- proposal construction ---------------------------------------------------


def _regularised_cov(thetas, weights):
    mean, cov = weighted_moments(thetas, weights)
    d = cov.shape[0]
    trace = float(np.trace(cov))
    jitter = 1e-8 * (trace / d if trace > 0 else 1.0)
    try:
        np.linalg.cholesky(cov + 0.0)
        ok = np.linalg.eigvalsh(cov).min() > 1e-12 * max(trace / d, 1e-12)
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        warnings.warn(
            "near-singular weighted covariance; adding diagonal jitter",
            RuntimeWarning,
        )
        cov = cov + jitter * np.eye(d)
    return mean, cov


class KdeProposal(Proposal):
    """Weighted Gaussian-mixture density over a particle population."""

    def __init__(self, thetas, weights, cov):
        self.thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        self.weights = np.asarray(weights, dtype=float)
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self._chol = np.linalg.cholesky(self.cov)
        d = self.cov.shape[0]
        self._log_norm = -0.5 * d * math.log(2 * math.pi) - float(
            np.sum(np.log(np.diag(self._chol)))
        )

    def sample_batch(self, rng, n):
        idx = rng.choice(self.thetas.shape[0], size=n, p=self.weights)
        z = rng.standard_normal((n, self.thetas.shape[1]))
        return self.thetas[idx] + z @ self._chol.T

    def density_batch(self, thetas):
        x = np.atleast_2d(np.asarray(thetas, dtype=float))
        # (B, N, d) residuals whitened by the common covariance factor
        delta = x[:, None, :] - self.thetas[None, :, :]
        y = np.linalg.solve(self._chol, delta.reshape(-1, delta.shape[2]).T)
        quad = np.sum(y * y, axis=0).reshape(delta.shape[0], delta.shape[1])
        comp = np.exp(self._log_norm - 0.5 * quad)
        return comp @ self.weights


class MomentMatchedNormalProposal(Proposal):
    """Multivariate normal matched to the weighted population moments."""

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self._chol = np.linalg.cholesky(self.cov)
        d = self.cov.shape[0]
        self._log_norm = -0.5 * d * math.log(2 * math.pi) - float(
            np.sum(np.log(np.diag(self._chol)))
        )

    def sample_batch(self, rng, n):
        z = rng.standard_normal((n, self.mean.size))
        return self.mean + z @ self._chol.T

    def density_batch(self, thetas):
        x = np.atleast_2d(np.asarray(thetas, dtype=float))
        y = np.linalg.solve(self._chol, (x - self.mean).T)
        quad = np.sum(y * y, axis=0)
        return np.exp(self._log_norm - 0.5 * quad)


def build_proposal(previous: ParticlePopulation, strategy="kde"):
    """Stage proposal from the previous population.

    ``"kde"`` returns the weighted mixture of normals centred at the
    particles with common covariance twice the weighted sample covariance
    (the usual population-Monte-Carlo spread, an external convention rather
    than anything prescribed); ``"parametric"`` moment-matches a single
    multivariate normal.
    """
    weights = previous.normalised_weights
    mean, cov = _regularised_cov(previous.thetas, weights)
    if strategy == "kde":
        return KdeProposal(previous.thetas, weights, 2.0 * cov)
    if strategy == "parametric":
        return MomentMatchedNormalProposal(mean, cov)
    raise ConfigurationError(
        f"unknown proposal strategy {strategy!r}; choose 'kde' or 'parametric'"
    )


def default_move_builder(thetas, normalised_weights):
    """Random-walk move with twice the weighted population covariance."""
    _, cov = _regularised_cov(thetas, normalised_weights)
    return GaussianRandomWalk(cov=2.0 * cov)


# -- sequential rejection-control importance sampling -----------------------


@dataclass
class SisConfig:
    """Fixed tolerance ladder with per-stage rejection control.

    The ladder must be non-increasing; the first entry may be ``inf``, in
    which case initial weights are the bare prior/proposal ratio.  Stage
    thresholds are either explicit (one per stage after the first) or a
    quantile of each stage's first-pass weights.
    """

    n: int
    h_schedule: Sequence[float]
    kernel_family: str
    metric: object
    initial_proposal: object
    c_values: Optional[Sequence[float]] = None
    c_quantile: Optional[float] = None
    proposal_strategy: str = "kde"
    stage_attempt_factor: int = 10_000

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("n must be at least 1")
        hs = [float(h) for h in self.h_schedule]
        if len(hs) < 1:
            raise ConfigurationError("tolerance schedule is empty")
        if any(h <= 0 for h in hs):
            raise ConfigurationError("tolerances must be positive")
        if any(b > a for a, b in zip(hs, hs[1:])):
            raise ConfigurationError("tolerance schedule must be non-increasing")
        if any(math.isinf(h) for h in hs[1:]):
            raise ConfigurationError("only the first tolerance may be infinite")
        if (self.c_values is None) == (self.c_quantile is None):
            raise ConfigurationError("set exactly one of c_values / c_quantile")
        if self.c_values is not None and len(self.c_values) != len(hs) - 1:
            raise ConfigurationError(
                "need one rejection-control threshold per stage after the first"
            )
        if self.c_quantile is not None and not 0 < self.c_quantile < 1:
            raise ConfigurationError("c_quantile must lie in (0, 1)")
        self.h_schedule = hs


@dataclass
class SisStageRecord:
    stage: int
    tolerance: float
    threshold: float
    ess: float
    attempts: int
    simulator_calls_cum: int


@dataclass
class SisResult:
    population: ParticlePopulation
    stages: list
    statistics: RunStatistics


def _sis_stage(model, cfg, proposal, h, c_fixed, stage, seed, workers):
    """One rejection-control stage: returns arrays plus attempt count."""
    s_obs = np.asarray(model.observed_summary, dtype=float)
    kernel = SmoothingKernel(cfg.kernel_family, h)
    budget = cfg.stage_attempt_factor * cfg.n

    def evaluate(first_index, rng):
        thetas = proposal.sample_batch(rng, CHUNK_SIZE)
        sims = model.simulate_batch(thetas, rng)
        u = rng.random(CHUNK_SIZE)
        dists = metric_batch(sims)
        prior = model.prior_density_batch(thetas)
        g = proposal.density_batch(thetas)
        return thetas, sims, dists, u, prior, g

    def metric_batch(sims):
        return cfg.metric.batch(sims, s_obs)

    out_t, out_s, out_w = [], [], []
    n_accepted = 0
    consumed = 0
    threshold = c_fixed
    first_pass = None
    for thetas, sims, dists, u, prior, g in map_chunks(
        evaluate, seed, stage_id(stage, PHASE_DRAW), workers=workers
    ):
        if np.any(g <= 0):
            raise ProposalSupportError(
                f"stage {stage} proposal density vanished at its own draw"
            )
        w = kernel_eval(kernel, dists) * prior / g
        start = 0
        if threshold is None:
            have = 0 if first_pass is None else sum(r[2].size for r in first_pass)
            take = min(CHUNK_SIZE, cfg.n - have)
            first_pass = (first_pass or []) + [
                (thetas[:take], sims[:take], w[:take], u[:take])
            ]
            if take < CHUNK_SIZE or have + take == cfg.n:
                all_w = np.concatenate([r[2] for r in first_pass])
                threshold = float(np.quantile(all_w, cfg.c_quantile))
                for fp_t, fp_s, fp_w, fp_u in first_pass:
                    r = np.ones_like(fp_w) if threshold <= 0 else np.minimum(
                        1.0, fp_w / threshold
                    )
                    consumed += fp_w.size
                    keep = np.flatnonzero(fp_u < r)
                    out_t.append(fp_t[keep])
                    out_s.append(fp_s[keep])
                    out_w.append(fp_w[keep] / r[keep])
                    n_accepted += keep.size
                first_pass = []
                start = take
                if n_accepted >= cfg.n:
                    break
            else:
                continue
        r = np.ones(w.size - start) if threshold <= 0 else np.minimum(
            1.0, w[start:] / threshold
        )
        hits = np.flatnonzero(u[start:] < r)
        need = cfg.n - n_accepted
        if hits.size >= need:
            cut = hits[:need]
            consumed += int(cut[-1]) + 1
            out_t.append(thetas[start:][cut])
            out_s.append(sims[start:][cut])
            out_w.append(w[start:][cut] / r[cut])
            n_accepted = cfg.n
            break
        consumed += r.size
        out_t.append(thetas[start:][hits])
        out_s.append(sims[start:][hits])
        out_w.append(w[start:][hits] / r[hits])
        n_accepted += hits.size
        if consumed > budget:
            raise StageFailureError(
                f"stage {stage} exhausted {budget} attempts with "
                f"{n_accepted}/{cfg.n} acceptances",
                stage=stage,
                statistics={"attempts": consumed, "accepted": n_accepted},
            )
    return (np.concatenate(out_t), np.concatenate(out_s),
            np.concatenate(out_w), consumed, threshold)


def sis_rejection_control(model, cfg: SisConfig, seed, workers=1):
    """Walk the tolerance ladder with per-stage rejection control.

    Stage proposals are rebuilt from the previous weighted population; the
    final population targets the smoothed posterior at the last tolerance.
    With thresholds driven to zero every particle passes immediately and
    the algorithm degrades to plain sequential importance sampling.
    """
    t0 = time.perf_counter()
    s_obs = np.asarray(model.observed_summary, dtype=float)
    n = cfg.n
    hs = cfg.h_schedule
    sims_total = 0
    stages = []

    # stage 0: plain weighted draws from the initial proposal
    g0 = cfg.initial_proposal
    rows = []
    consumed = 0
    def eval0(first_index, rng):
        thetas = g0.sample_batch(rng, CHUNK_SIZE)
        sims = model.simulate_batch(thetas, rng)
        rng.random(CHUNK_SIZE)  # keep the chunk layout uniform across stages
        return thetas, sims

    for thetas, sims in map_chunks(eval0, seed, stage_id(0, PHASE_INIT),
                                   workers=workers):
        take = min(CHUNK_SIZE, n - consumed)
        rows.append((thetas[:take], sims[:take]))
        consumed += take
        if consumed >= n:
            break
    thetas, summaries = map(np.concatenate, zip(*rows))
    prior = model.prior_density_batch(thetas)
    g_dens = g0.density_batch(thetas)
    if np.any(g_dens <= 0):
        raise ProposalSupportError("initial proposal density vanished at a draw")
    w = prior / g_dens
    if not math.isinf(hs[0]):
        kernel0 = SmoothingKernel(cfg.kernel_family, hs[0])
        w = w * kernel_eval(kernel0, cfg.metric.batch(summaries, s_obs))
    sims_total += n
    population = ParticlePopulation(
        thetas=thetas, raw_weights=w, summaries=summaries, tolerance=hs[0]
    )
    stages.append(SisStageRecord(
        stage=0, tolerance=hs[0], threshold=float("nan"),
        ess=population.ess(), attempts=n, simulator_calls_cum=sims_total,
    ))

    for m, h in enumerate(hs[1:], start=1):
        proposal = build_proposal(population, cfg.proposal_strategy)
        c_fixed = None if cfg.c_values is None else float(cfg.c_values[m - 1])
        thetas, summaries, w_star, attempts, c_used = _sis_stage(
            model, cfg, proposal, h, c_fixed, m, seed, workers
        )
        sims_total += attempts
        population = ParticlePopulation(
            thetas=thetas, raw_weights=w_star, summaries=summaries, tolerance=h
        )
        stages.append(SisStageRecord(
            stage=m, tolerance=h, threshold=c_used, ess=population.ess(),
            attempts=attempts, simulator_calls_cum=sims_total,
        ))

    stats = RunStatistics(
        simulator_calls=sims_total,
        acceptance_rate=(len(hs) * n) / max(sims_total, 1),
        wall_time=time.perf_counter() - t0,
        ess_final=population.ess(),
    )
    return SisResult(population=population, stages=stages, statistics=stats)


# -- adaptive SMC ------------------------------------------------------------


def _log_factor(kernel_family, h, distances):
    """Per-particle log replicate-sum of kernel values; -inf if all miss.

    ``h = inf`` is the flat-stage convention: factor identically one.
    """
    if math.isinf(h):
        return np.zeros(distances.shape[0])
    log_k = kernel_log_eval(SmoothingKernel(kernel_family, h), distances)
    with np.errstate(invalid="ignore"):
        return logsumexp(log_k, axis=1)


def _reweighted_log_w(log_w_prev, lf_new, lf_prev):
    out = log_w_prev + lf_new - lf_prev
    # particles dead before stay dead; -inf - -inf would otherwise be nan
    dead = ~np.isfinite(log_w_prev) | ~np.isfinite(lf_prev)
    out[dead] = -np.inf
    return out


def solve_next_h(log_w_prev, distances, kernel_family, alpha, h_prev):
    """Largest tolerance at which the reweighted ESS hits ``alpha`` times
    the current ESS.

    For kernels continuous in the scale this bisects the exactly evaluable
    ESS curve (the stored distances make reweighting simulation-free); for
    the indicator kernel, where the ESS is a step function of the scale,
    it returns the largest jump point whose ESS does not exceed the target.
    Returns ``(h, achieved_ess, stalled)``; ``stalled`` flags a target
    unreachable even as the tolerance vanishes.
    """
    log_w_prev = np.asarray(log_w_prev, dtype=float)
    distances = np.atleast_2d(np.asarray(distances, dtype=float))
    ess_prev = ess_from_log_weights(log_w_prev)
    target = alpha * ess_prev
    if target < 1.0:
        raise ConfigurationError(
            f"target ESS {target:.3g} below 1; alpha too small for this population"
        )
    lf_prev = _log_factor(kernel_family, h_prev, distances)

    def ess_at(h):
        lw = _reweighted_log_w(log_w_prev, _log_factor(kernel_family, h, distances),
                               lf_prev)
        try:
            return ess_from_log_weights(lw)
        except DegeneratePopulationError:
            return 0.0

    if alpha >= 1.0:
        return float(h_prev), ess_prev, False

    if kernel_family == "uniform":
        alive_mask = np.isfinite(log_w_prev)
        cand = np.unique(distances[alive_mask])
        cand = cand[cand <= h_prev]
        positive = cand[cand > 0]
        levels = list(positive)
        if positive.size < cand.size and positive.size:
            # an all-zero-distance level exists below the smallest positive jump
            levels = [0.5 * positive[0]] + levels
        if not levels:
            return float(h_prev), ess_prev, True
        values = np.array([ess_at(h) for h in levels])
        ok = np.flatnonzero(values <= target * (1.0 + 1e-12))
        if ok.size:
            pick = ok[-1]  # largest level meeting the target from below
            return float(levels[pick]), float(values[pick]), False
        pick = int(np.argmin(values))
        return float(levels[pick]), float(values[pick]), True

    # continuous families: bracket then bisect
    d_max = float(distances.max())
    hi = h_prev if not math.isinf(h_prev) else max(4.0 * d_max, 1e-12)
    grow = 0
    while ess_at(hi) < target and grow < 200:
        hi *= 2.0
        grow += 1
    lo = hi
    while ess_at(lo) > target:
        lo *= 0.5
        if lo < 1e-300:
            return lo, ess_at(lo), True
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if ess_at(mid) > target:
            hi = mid
        else:
            lo = mid
    # the lo side meets the target from below, as the solve is defined
    return float(lo), float(ess_at(lo)), False


def move_population(model, thetas, distances, summaries, log_w, kernel_family,
                    h, metric, move_proposal, n_replicates, rng):
    """One MCMC rejuvenation sweep at fixed tolerance.

    Only particles with positive weight are moved (zero-weight particles
    carry no mass and regenerating their summaries would change nothing).
    Proposals for the whole population are drawn first so the stream layout
    does not depend on the weight pattern; simulations are spent on movers
    only.  Returns updated arrays plus (accepted, attempted, simulations).
    """
    n = thetas.shape[0]
    s_obs = np.asarray(model.observed_summary, dtype=float)
    proposals = move_proposal.sample_batch(thetas, rng)
    movers = np.flatnonzero(np.isfinite(log_w))
    sims = 0
    if movers.size == 0:
        raise DegeneratePopulationError("no particle with positive weight to move")
    reps = np.stack(
        [model.simulate_batch(proposals[movers], rng)
         for _ in range(n_replicates)],
        axis=1,
    )
    sims += movers.size * n_replicates
    u = rng.random(n)

    dist_new = metric.batch(reps, s_obs)
    lf_new = _log_factor(kernel_family, h, dist_new)
    lf_cur = _log_factor(kernel_family, h, distances[movers])
    with np.errstate(divide="ignore"):
        log_prior_new = np.log(model.prior_density_batch(proposals[movers]))
        log_prior_cur = np.log(model.prior_density_batch(thetas[movers]))
    if getattr(move_proposal, "symmetric", False):
        log_q_fwd = log_q_rev = np.zeros(movers.size)
    else:
        with np.errstate(divide="ignore"):
            log_q_fwd = np.log(
                move_proposal.density_pairs(thetas[movers], proposals[movers])
            )
            log_q_rev = np.log(
                move_proposal.density_pairs(proposals[movers], thetas[movers])
            )
    log_num = lf_new + log_prior_new + log_q_rev
    log_den = lf_cur + log_prior_cur + log_q_fwd
    with np.errstate(invalid="ignore"):
        log_a = np.minimum(0.0, log_num - log_den)
    log_a[~np.isfinite(log_num)] = -np.inf
    accept = np.log(u[movers]) < log_a

    idx = movers[accept]
    thetas = thetas.copy()
    distances = distances.copy()
    thetas[idx] = proposals[movers][accept]
    distances[idx] = dist_new[accept]
    if summaries is not None:
        summaries = summaries.copy()
        summaries[idx] = reps[accept]
    return thetas, distances, summaries, int(accept.sum()), movers.size, sims


@dataclass
class SmcConfig:
    """Adaptive sampler inputs.

    ``alpha`` controls how fast the ESS is allowed to decay per stage;
    resampling triggers below ``resample_threshold`` (default N/2).  The
    run stops at the first of: move acceptance below ``min_move_rate``
    (the natural-terminal-tolerance rule), tolerance at or below ``min_h``,
    or ``max_stages``.
    """

    n: int
    alpha: float
    kernel_family: str
    metric: object
    initial_proposal: object
    n_replicates: int = 1
    resample_threshold: Optional[float] = None
    resampling_scheme: str = "systematic"
    move_builder: Callable = None
    moves_per_stage: int = 1
    min_move_rate: float = 0.015
    min_h: float = 0.0
    max_stages: int = 200

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("n must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie strictly between 0 and 1")
        if self.n_replicates < 1:
            raise ConfigurationError("n_replicates must be at least 1")
        if self.resample_threshold is None:
            self.resample_threshold = self.n / 2.0
        if not 1.0 <= self.resample_threshold <= self.n:
            raise ConfigurationError("resample threshold must lie in [1, n]")
        if self.resampling_scheme not in RESAMPLING_SCHEMES:
            raise ConfigurationError(
                f"unknown resampling scheme {self.resampling_scheme!r}"
            )
        if self.move_builder is None:
            self.move_builder = default_move_builder
        if self.moves_per_stage < 1:
            raise ConfigurationError("moves_per_stage must be at least 1")
        if self.max_stages < 1:
            raise ConfigurationError("max_stages must be at least 1")


@dataclass
class SmcStageRecord:
    stage: int
    tolerance: float
    ess_before: float   # after reweighting, before any resampling
    ess_after: float    # after resampling (equals N when it occurred)
    resampled: bool
    move_accept_rate: float
    simulator_calls_cum: int


@dataclass
class SmcResult:
    population: ParticlePopulation
    stages: list
    statistics: RunStatistics
    initial_ess: float
    stop_reason: str = ""


def adaptive_smc(model, cfg: SmcConfig, seed, workers=1):
    """ESS-driven adaptive sequential Monte Carlo.

    Starts from the initial proposal at infinite tolerance (weights are the
    bare prior/proposal ratio), then repeats: solve for the next tolerance
    so the reweighted ESS equals ``alpha`` times the current one, resample
    when the ESS falls below the threshold, and rejuvenate surviving
    particles with an MCMC move at the current tolerance.  Terminates by
    the configured stop rule; the move-rate rule is the natural one, firing
    when the sampler can no longer move particles and thereby fixing the
    terminal tolerance.
    """
    t0 = time.perf_counter()
    n, T = cfg.n, cfg.n_replicates
    s_obs = np.asarray(model.observed_summary, dtype=float)
    g0 = cfg.initial_proposal

    # initialise at infinite tolerance
    rows = []
    consumed = 0

    def eval0(first_index, rng):
        thetas = g0.sample_batch(rng, CHUNK_SIZE)
        reps = np.stack(
            [model.simulate_batch(thetas, rng) for _ in range(T)], axis=1
        )
        return thetas, reps

    for thetas, reps in map_chunks(eval0, seed, stage_id(0, PHASE_INIT),
                                   workers=workers):
        take = min(CHUNK_SIZE, n - consumed)
        rows.append((thetas[:take], reps[:take]))
        consumed += take
        if consumed >= n:
            break
    thetas, summaries = map(np.concatenate, zip(*rows))
    g_dens = g0.density_batch(thetas)
    if np.any(g_dens <= 0):
        raise ProposalSupportError("initial proposal density vanished at a draw")
    with np.errstate(divide="ignore"):
        log_w = np.log(model.prior_density_batch(thetas)) - np.log(g_dens)
    distances = cfg.metric.batch(summaries, s_obs)
    sims_total = n * T
    initial_ess = ess_from_log_weights(log_w)

    h_prev = math.inf
    stages = []
    stop_reason = f"max_stages ({cfg.max_stages}) reached"
    for m in range(1, cfg.max_stages + 1):
        h_m, achieved_ess, stalled = solve_next_h(
            log_w, distances, cfg.kernel_family, cfg.alpha, h_prev
        )
        if stalled:
            raise ScheduleStallError(
                f"stage {m}: no tolerance reaches target ESS "
                f"{cfg.alpha * ess_from_log_weights(log_w):.4g} "
                f"(achievable {achieved_ess:.4g} at h = {h_m:.4g})"
            )
        lf_prev = _log_factor(cfg.kernel_family, h_prev, distances)
        lf_new = _log_factor(cfg.kernel_family, h_m, distances)
        log_w = _reweighted_log_w(log_w, lf_new, lf_prev)
        ess_before = ess_from_log_weights(log_w)

        resampled = ess_before < cfg.resample_threshold
        if resampled:
            rng = derive_rng_stream(seed, (stage_id(m, PHASE_RESAMPLE), 0))
            idx = resample_indices(
                normalised_from_log_weights(log_w), cfg.resampling_scheme, rng
            )
            thetas = thetas[idx]
            summaries = summaries[idx]
            distances = distances[idx]
            log_w = np.full(n, -math.log(n))
        ess_after = ess_from_log_weights(log_w)

        move_proposal = cfg.move_builder(
            thetas, normalised_from_log_weights(log_w)
        )
        accepted = attempted = 0
        for j in range(cfg.moves_per_stage):
            rng = derive_rng_stream(seed, (stage_id(m, PHASE_MOVE), j))
            thetas, distances, summaries, acc, att, sims = move_population(
                model, thetas, distances, summaries, log_w, cfg.kernel_family,
                h_m, cfg.metric, move_proposal, T, rng,
            )
            accepted += acc
            attempted += att
            sims_total += sims
        move_rate = accepted / attempted if attempted else 0.0

        stages.append(SmcStageRecord(
            stage=m, tolerance=h_m, ess_before=ess_before, ess_after=ess_after,
            resampled=resampled, move_accept_rate=move_rate,
            simulator_calls_cum=sims_total,
        ))
        h_prev = h_m
        if move_rate < cfg.min_move_rate:
            stop_reason = (
                f"move acceptance rate {move_rate:.4f} below "
                f"{cfg.min_move_rate}"
            )
            break
        if h_m <= cfg.min_h:
            stop_reason = f"tolerance {h_m:.6g} at or below min_h {cfg.min_h}"
            break

    raw = normalised_from_log_weights(log_w)
    population = ParticlePopulation(
        thetas=thetas, raw_weights=raw, summaries=summaries, tolerance=h_prev
    )
    stats = RunStatistics(
        simulator_calls=sims_total,
        acceptance_rate=float("nan"),
        wall_time=time.perf_counter() - t0,
        ess_final=population.ess(),
    )
    return SmcResult(population=population, stages=stages, statistics=stats,
                     initial_ess=initial_ess, stop_reason=stop_reason)
