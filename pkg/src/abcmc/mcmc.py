"""Markov chain Monte Carlo on the smoothed joint target.

The acceptance ratio never touches the intractable likelihood: it is a
pure function of kernel masses, prior densities and proposal densities
(see :func:`acceptance_ratio`, whose signature is the guarantee).  The
standard sampler with ``n_replicates > 1`` is the pseudo-marginal variant;
two alternative transition kernels trade extra simulation for better
escape behaviour from low-density regions, and the augmented sampler
treats the kernel scale itself as a tempering parameter.

A chain is sequential, so each chain owns a single derived stream keyed by
its chain index; per-iteration draws always occur in the fixed order
proposal, (scale proposal,) replicate summaries, acceptance uniform.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diagnostics import RunStatistics
from .errors import (
    ConfigurationError,
    DegenerateSelectionError,
    InitialisationError,
    StuckIterationError,
)
from .kernels import SmoothingKernel, _base_eval
from .proposals import FixedValueProposal
from .rng import PHASE_CHAIN, derive_rng_stream, stage_id


@dataclass
class ChainTrace:
    """Full chain record: one row per state, the initial state included.

    ``kernel_mass`` is NaN for transition kernels that do not carry a mass
    (the regenerating and race variants); ``tolerance`` is constant except
    under the augmented sampler.
    """

    thetas: np.ndarray           # (n + 1, d)
    kernel_mass: np.ndarray      # (n + 1,)
    accepted: np.ndarray         # (n + 1,) bool; row 0 is False by convention
    tolerance: np.ndarray        # (n + 1,)
    simulator_calls_cum: np.ndarray  # (n + 1,)
    statistics: RunStatistics = field(default=None)

    def __len__(self):
        return self.thetas.shape[0]

    @property
    def acceptance_count(self):
        return int(self.accepted[1:].sum())

    @property
    def simulator_calls(self):
        return int(self.simulator_calls_cum[-1])

    def tail(self, burn_in):
        """Trace with the first ``burn_in`` states dropped (view)."""
        return ChainTrace(
            thetas=self.thetas[burn_in:],
            kernel_mass=self.kernel_mass[burn_in:],
            accepted=self.accepted[burn_in:],
            tolerance=self.tolerance[burn_in:],
            simulator_calls_cum=self.simulator_calls_cum[burn_in:],
            statistics=self.statistics,
        )


def acceptance_ratio(mass_new, prior_new, q_reverse, mass_old, prior_old,
                     q_forward):
    """Metropolis-Hastings ratio of the smoothed joint target.

    Receives only kernel masses, prior densities and proposal densities;
    by construction no likelihood term can enter.  Zero numerator factors
    give zero; the current state always has positive mass and prior.
    """
    num = mass_new * prior_new * q_reverse
    if num <= 0.0:
        return 0.0
    den = mass_old * prior_old * q_forward
    return min(1.0, num / den)


def _mass(kernel_family, h, dists):
    """Replicate-averaged kernel mass, skipping argument validation."""
    return float(np.mean(_base_eval(kernel_family, np.abs(dists) / h))) / h


def _distances(metric, reps, s_obs):
    # fast path for one-dimensional euclidean summaries (the common case
    # in long chains, where per-iteration overhead dominates)
    if metric.kind == "euclidean" and reps.shape[1] == 1:
        return np.abs(reps[:, 0] - s_obs[0])
    return metric.batch(reps, s_obs)


def _initial_state(model, kernel, metric, n_replicates, init_max_tries, rng,
                   init_theta=None):
    """Algorithm-as-printed initialisation: draw from the prior (or retry a
    supplied start) until the kernel mass is positive."""
    s_obs = np.asarray(model.observed_summary, dtype=float)
    sims = 0
    for _ in range(init_max_tries):
        theta = model.prior_sample(rng) if init_theta is None \
            else np.atleast_1d(np.asarray(init_theta, dtype=float))
        reps = model.simulate_replicates(theta, n_replicates, rng)
        sims += n_replicates
        dists = _distances(metric, reps, s_obs)
        mass = _mass(kernel.family, kernel.scale, dists)
        if mass > 0.0:
            return theta, dists, mass, sims
    raise InitialisationError(
        f"no starting state with positive kernel mass in {init_max_tries} "
        "tries; consider a larger tolerance or a pilot start"
    )


def abc_mcmc(model, proposal, kernel: SmoothingKernel, metric, n_iterations,
             n_replicates=1, init_max_tries=10_000, seed=0, chain_index=0,
             init_theta=None):
    """Metropolis-Hastings chain targeting the smoothed posterior.

    With ``n_replicates = 1`` this is the standard sampler; with more
    replicates the acceptance uses the replicate-averaged kernel mass (the
    fixed-T pseudo-marginal chain), which improves mixing at simulation
    cost while leaving the parameter marginal unchanged.
    """
    if kernel.is_infinite:
        raise ConfigurationError("MCMC needs a finite kernel scale")
    if n_replicates < 1:
        raise ConfigurationError("n_replicates must be at least 1")
    t0 = time.perf_counter()
    rng = derive_rng_stream(seed, (stage_id(0, PHASE_CHAIN), chain_index))
    s_obs = np.asarray(model.observed_summary, dtype=float)
    fam, h = kernel.family, kernel.scale
    theta, dists, mass, sims = _initial_state(
        model, kernel, metric, n_replicates, init_max_tries, rng, init_theta
    )
    prior = model.prior_density(theta)
    sym = getattr(proposal, "symmetric", False)

    d = theta.size
    thetas = np.empty((n_iterations + 1, d))
    masses = np.empty(n_iterations + 1)
    accepted = np.zeros(n_iterations + 1, dtype=bool)
    calls = np.empty(n_iterations + 1, dtype=np.int64)
    thetas[0], masses[0], calls[0] = theta, mass, sims

    for i in range(1, n_iterations + 1):
        theta_new = proposal.sample(theta, rng)
        reps = model.simulate_replicates(theta_new, n_replicates, rng)
        sims += n_replicates
        dists_new = _distances(metric, reps, s_obs)
        mass_new = _mass(fam, h, dists_new)
        prior_new = model.prior_density(theta_new)
        if sym:
            q_fwd = q_rev = 1.0
        else:
            q_fwd = proposal.density(theta, theta_new)
            q_rev = proposal.density(theta_new, theta)
        a = acceptance_ratio(mass_new, prior_new, q_rev, mass, prior, q_fwd)
        if rng.random() < a:
            theta, mass, prior = theta_new, mass_new, prior_new
            accepted[i] = True
        thetas[i], masses[i], calls[i] = theta, mass, sims

    stats = RunStatistics(
        simulator_calls=sims,
        acceptance_rate=float(accepted[1:].mean()),
        wall_time=time.perf_counter() - t0,
        ess_final=float("nan"),
    )
    return ChainTrace(
        thetas=thetas,
        kernel_mass=masses,
        accepted=accepted,
        tolerance=np.full(n_iterations + 1, h),
        simulator_calls_cum=calls,
        statistics=stats,
    )


def abc_mcmc_regenerate(model, proposal, kernel: SmoothingKernel, metric,
                        n_iterations, n_replicates=1, seed=0, chain_index=0,
                        init_theta=None):
    """Transition kernel that refreshes the current state's evidence.

    Indicator (uniform) kernels only.  Each iteration draws ``T``
    replicates at the proposal and ``T - 1`` fresh replicates at the
    current state; the acceptance count for the current state gets a +1
    for the replicate that originally carried the chain there.  Regenerating
    the denominator lets the chain escape regions where a stale lucky hit
    would otherwise pin it.
    """
    if kernel.family != "uniform":
        raise ConfigurationError(
            "the regenerating kernel is defined for the uniform (indicator) "
            "kernel only"
        )
    if n_replicates < 1:
        raise ConfigurationError("n_replicates must be at least 1")
    t0 = time.perf_counter()
    rng = derive_rng_stream(seed, (stage_id(0, PHASE_CHAIN), chain_index))
    s_obs = np.asarray(model.observed_summary, dtype=float)
    h = kernel.scale
    sims = 0
    theta = model.prior_sample(rng) if init_theta is None \
        else np.atleast_1d(np.asarray(init_theta, dtype=float))
    prior = model.prior_density(theta)
    if prior <= 0:
        raise InitialisationError("initial state has zero prior density")
    sym = getattr(proposal, "symmetric", False)

    d = theta.size
    thetas = np.empty((n_iterations + 1, d))
    accepted = np.zeros(n_iterations + 1, dtype=bool)
    calls = np.empty(n_iterations + 1, dtype=np.int64)
    thetas[0], calls[0] = theta, sims

    for i in range(1, n_iterations + 1):
        theta_new = proposal.sample(theta, rng)
        reps_new = model.simulate_replicates(theta_new, n_replicates, rng)
        hits_new = int(np.sum(_distances(metric, reps_new, s_obs) <= h))
        if n_replicates > 1:
            reps_cur = model.simulate_replicates(theta, n_replicates - 1, rng)
            hits_cur = int(np.sum(_distances(metric, reps_cur, s_obs) <= h))
        else:
            hits_cur = 0
        sims += 2 * n_replicates - 1
        prior_new = model.prior_density(theta_new)
        if sym:
            q_fwd = q_rev = 1.0
        else:
            q_fwd = proposal.density(theta, theta_new)
            q_rev = proposal.density(theta_new, theta)
        a = acceptance_ratio(float(hits_new), prior_new, q_rev,
                             float(1 + hits_cur), prior, q_fwd)
        if rng.random() < a:
            theta, prior = theta_new, prior_new
            accepted[i] = True
        thetas[i], calls[i] = theta, sims

    stats = RunStatistics(
        simulator_calls=sims,
        acceptance_rate=float(accepted[1:].mean()),
        wall_time=time.perf_counter() - t0,
        ess_final=float("nan"),
    )
    return ChainTrace(
        thetas=thetas,
        kernel_mass=np.full(n_iterations + 1, np.nan),
        accepted=accepted,
        tolerance=np.full(n_iterations + 1, h),
        simulator_calls_cum=calls,
        statistics=stats,
    )


def abc_mcmc_race(model, proposal, kernel: SmoothingKernel, metric,
                  n_iterations, per_iter_sim_cap=1_000_000, seed=0,
                  chain_index=0, init_theta=None):
    """Race transition kernel with a random number of simulations.

    Indicator kernels only.  After a prior/proposal Metropolis gate, the
    current and proposed states alternately simulate summaries until either
    scores a hit; the move is accepted exactly when the proposal's latest
    replicate hit (a simultaneous hit counts for the proposal, as the rule
    is stated in terms of the proposal's indicator alone).
    """
    if kernel.family != "uniform":
        raise ConfigurationError(
            "the race kernel is defined for the uniform (indicator) kernel only"
        )
    t0 = time.perf_counter()
    rng = derive_rng_stream(seed, (stage_id(0, PHASE_CHAIN), chain_index))
    s_obs = np.asarray(model.observed_summary, dtype=float)
    h = kernel.scale
    sims = 0
    theta = model.prior_sample(rng) if init_theta is None \
        else np.atleast_1d(np.asarray(init_theta, dtype=float))
    prior = model.prior_density(theta)
    if prior <= 0:
        raise InitialisationError("initial state has zero prior density")
    sym = getattr(proposal, "symmetric", False)

    d = theta.size
    thetas = np.empty((n_iterations + 1, d))
    accepted = np.zeros(n_iterations + 1, dtype=bool)
    calls = np.empty(n_iterations + 1, dtype=np.int64)
    thetas[0], calls[0] = theta, sims

    for i in range(1, n_iterations + 1):
        theta_new = proposal.sample(theta, rng)
        prior_new = model.prior_density(theta_new)
        if sym:
            q_fwd = q_rev = 1.0
        else:
            q_fwd = proposal.density(theta, theta_new)
            q_rev = proposal.density(theta_new, theta)
        gate = 0.0 if prior_new <= 0 else min(
            1.0, prior_new * q_rev / (prior * q_fwd)
        )
        if rng.random() < gate:
            # alternate simulations until either side hits
            used = 0
            while True:
                if used + 2 > per_iter_sim_cap:
                    raise StuckIterationError(
                        f"race exceeded {per_iter_sim_cap} simulations between "
                        f"states {theta} and {theta_new}"
                    )
                s_cur = model.simulate_summary(theta, rng)
                s_new = model.simulate_summary(theta_new, rng)
                used += 2
                hit_cur = float(metric(s_cur, s_obs)) <= h
                hit_new = float(metric(s_new, s_obs)) <= h
                if hit_cur or hit_new:
                    break
            sims += used
            if hit_new:
                theta, prior = theta_new, prior_new
                accepted[i] = True
        thetas[i], calls[i] = theta, sims

    stats = RunStatistics(
        simulator_calls=sims,
        acceptance_rate=float(accepted[1:].mean()),
        wall_time=time.perf_counter() - t0,
        ess_final=float("nan"),
    )
    return ChainTrace(
        thetas=thetas,
        kernel_mass=np.full(n_iterations + 1, np.nan),
        accepted=accepted,
        tolerance=np.full(n_iterations + 1, h),
        simulator_calls_cum=calls,
        statistics=stats,
    )


class TruncatedExponentialPrior:
    """Pseudo-prior on the kernel scale: exponential truncated to (0, h_max].

    Monotone preference for small scales with enough tail mass to let the
    chain heat up when stuck.
    """

    def __init__(self, rate, h_max):
        if rate <= 0 or h_max <= 0:
            raise ConfigurationError("rate and h_max must be positive")
        self.rate = float(rate)
        self.h_max = float(h_max)
        self._norm = 1.0 - math.exp(-self.rate * self.h_max)

    def density(self, h):
        h = float(h)
        if h <= 0 or h > self.h_max:
            return 0.0
        return self.rate * math.exp(-self.rate * h) / self._norm

    def mean(self):
        r, m = self.rate, self.h_max
        return 1.0 / r - m * math.exp(-r * m) / (1.0 - math.exp(-r * m))


def augmented_scale_mcmc(model, theta_proposal, scale_proposal, scale_prior,
                         kernel_family, metric, n_iterations, h_init,
                         n_replicates=1, init_max_tries=10_000, seed=0,
                         chain_index=0, init_theta=None, update="joint"):
    """Chain on the target augmented with the kernel scale.

    The scale acts as a tempering parameter: hot states (large h) accept
    easily and cold ones approximate the posterior closely; the pseudo
    prior steers the balance.  ``update="joint"`` moves (theta, h)
    together with fresh summaries; ``"componentwise"`` alternates a theta
    move at fixed h with a summary-preserving h move.  A degenerate scale
    proposal (:class:`FixedValueProposal`) consumes no draws, making the
    joint chain trace-identical to :func:`abc_mcmc` at that scale.
    """
    if update not in ("joint", "componentwise"):
        raise ConfigurationError("update must be 'joint' or 'componentwise'")
    if n_replicates < 1:
        raise ConfigurationError("n_replicates must be at least 1")
    if not h_init > 0 or math.isinf(h_init):
        raise ConfigurationError("h_init must be positive and finite")
    t0 = time.perf_counter()
    rng = derive_rng_stream(seed, (stage_id(0, PHASE_CHAIN), chain_index))
    s_obs = np.asarray(model.observed_summary, dtype=float)
    fam = kernel_family
    kernel0 = SmoothingKernel(fam, float(h_init))
    theta, dists, mass, sims = _initial_state(
        model, kernel0, metric, n_replicates, init_max_tries, rng, init_theta
    )
    h = float(h_init)
    prior = model.prior_density(theta)
    prior_h = scale_prior.density(h)
    if prior_h <= 0:
        raise ConfigurationError("h_init lies outside the scale prior support")
    sym = getattr(theta_proposal, "symmetric", False)
    fixed_scale = isinstance(scale_proposal, FixedValueProposal)

    d = theta.size
    thetas = np.empty((n_iterations + 1, d))
    masses = np.empty(n_iterations + 1)
    accepted = np.zeros(n_iterations + 1, dtype=bool)
    h_path = np.empty(n_iterations + 1)
    calls = np.empty(n_iterations + 1, dtype=np.int64)
    thetas[0], masses[0], h_path[0], calls[0] = theta, mass, h, sims

    for i in range(1, n_iterations + 1):
        moved = False
        theta_new = theta_proposal.sample(theta, rng)
        if update == "joint":
            if fixed_scale:
                h_new = h
            else:
                h_new = float(scale_proposal.sample(np.array([h]), rng)[0])
            prior_h_new = scale_prior.density(h_new) if h_new > 0 else 0.0
            if prior_h_new > 0.0:
                reps = model.simulate_replicates(theta_new, n_replicates, rng)
                sims += n_replicates
                dists_new = _distances(metric, reps, s_obs)
                mass_new = _mass(fam, h_new, dists_new)
                prior_new = model.prior_density(theta_new)
                if sym:
                    q_fwd = q_rev = 1.0
                else:
                    q_fwd = theta_proposal.density(theta, theta_new)
                    q_rev = theta_proposal.density(theta_new, theta)
                if not fixed_scale:
                    q_fwd *= scale_proposal.density(h, h_new)
                    q_rev *= scale_proposal.density(h_new, h)
                a = acceptance_ratio(mass_new * prior_h_new, prior_new, q_rev,
                                     mass * prior_h, prior, q_fwd)
                if rng.random() < a:
                    theta, dists, mass, prior = (theta_new, dists_new,
                                                 mass_new, prior_new)
                    h, prior_h = h_new, prior_h_new
                    moved = True
        else:
            # theta move at fixed h
            reps = model.simulate_replicates(theta_new, n_replicates, rng)
            sims += n_replicates
            dists_new = _distances(metric, reps, s_obs)
            mass_new = _mass(fam, h, dists_new)
            prior_new = model.prior_density(theta_new)
            if sym:
                q_fwd = q_rev = 1.0
            else:
                q_fwd = theta_proposal.density(theta, theta_new)
                q_rev = theta_proposal.density(theta_new, theta)
            a = acceptance_ratio(mass_new, prior_new, q_rev, mass, prior, q_fwd)
            if rng.random() < a:
                theta, dists, mass, prior = (theta_new, dists_new,
                                             mass_new, prior_new)
                moved = True
            # h move over the retained summaries (the summaries are part of
            # the augmented state, so no regeneration is required)
            if not fixed_scale:
                h_new = float(scale_proposal.sample(np.array([h]), rng)[0])
                prior_h_new = scale_prior.density(h_new) if h_new > 0 else 0.0
                if prior_h_new > 0.0:
                    mass_new = _mass(fam, h_new, dists)
                    a = acceptance_ratio(
                        mass_new * prior_h_new, 1.0,
                        scale_proposal.density(h_new, h),
                        mass * prior_h, 1.0,
                        scale_proposal.density(h, h_new),
                    )
                    if rng.random() < a:
                        h, prior_h, mass = h_new, prior_h_new, mass_new
                        moved = True
        accepted[i] = moved
        thetas[i], masses[i], h_path[i], calls[i] = theta, mass, h, sims

    stats = RunStatistics(
        simulator_calls=sims,
        acceptance_rate=float(accepted[1:].mean()),
        wall_time=time.perf_counter() - t0,
        ess_final=float("nan"),
    )
    return ChainTrace(
        thetas=thetas,
        kernel_mass=masses,
        accepted=accepted,
        tolerance=h_path,
        simulator_calls_cum=calls,
        statistics=stats,
    )


def truncate_by_h(trace: ChainTrace, h_star):
    """States of an augmented chain whose scale is at most ``h_star``.

    The retained parameters are a sample from the truncated approximation;
    choosing the largest ``h_star`` whose truncated sample has stabilised
    yields the best posterior approximation the chain supports.
    """
    if not h_star > 0:
        raise ConfigurationError("h_star must be positive")
    mask = trace.tolerance <= h_star
    if not mask.any():
        raise DegenerateSelectionError(
            f"no states with tolerance <= {h_star}; the smallest visited "
            f"tolerance is {trace.tolerance.min():.6g}"
        )
    return trace.thetas[mask]
