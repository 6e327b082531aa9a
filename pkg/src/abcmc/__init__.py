"""Likelihood-free Bayesian inference by simulation.

Samplers draw from the kernel-smoothed posterior
``pi_h(theta | s_obs) ∝ ∫ K_h(||s - s_obs||) p(s | theta) pi(theta) ds``
using only a prior and a summary simulator: rejection and importance
sampling with several variance-control variants, Markov chain Monte Carlo
(including pseudo-marginal and scale-augmented chains), and sequential
Monte Carlo with adaptive tolerance schedules.  Every run is reproducible
bit-for-bit from one master seed regardless of worker count.
"""

from .distances import DistanceMetric, precision_metric_from_summaries
from .diagnostics import (
    RunStatistics,
    batch_means_se,
    bootstrap_se_weighted_mean,
    ess_per_simulator_call,
    ks_distance,
    markov_chain_ess,
    r_hat,
    sojourn_times,
    weighted_moments,
    weighted_quantile,
)
from .errors import (
    AbcError,
    BoundViolationError,
    BudgetExhaustedError,
    ConfigurationError,
    DegeneratePopulationError,
    DegenerateSelectionError,
    InitialisationError,
    InvalidInputError,
    OracleResolutionError,
    ProposalSupportError,
    RegistrationError,
    ScheduleStallError,
    StageFailureError,
    StuckIterationError,
)
from .importance import (
    ImportanceConfig,
    ImportanceResult,
    RejectionControlConfig,
    early_rejection_importance_sample,
    importance_rejection_sample,
    importance_sample,
    knn_importance_sample,
    marginal_posterior_estimate,
    rejection_control_sample,
)
from .kernels import SmoothingKernel, kernel_at_zero, kernel_eval
from .mcmc import (
    ChainTrace,
    TruncatedExponentialPrior,
    abc_mcmc,
    abc_mcmc_race,
    abc_mcmc_regenerate,
    acceptance_ratio,
    augmented_scale_mcmc,
    truncate_by_h,
)
from .model import GenerativeModel
from .models import (
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
from .population import ParticlePopulation, WeightedParticle
from .proposals import (
    FixedValueProposal,
    GaussianRandomWalk,
    IndependentNormalProposal,
    LogScaleRandomWalk,
    MixtureProposal,
    MoveProposal,
    PriorProposal,
    Proposal,
)
from .rejection import (
    RejectionConfig,
    RejectionResult,
    estimate_sup_ratio,
    rejection_sample,
    rejection_sample_auto_h,
)
from .rng import derive_rng_stream
from .smc import (
    SisConfig,
    SisResult,
    SmcConfig,
    SmcResult,
    adaptive_smc,
    build_proposal,
    resample,
    resample_indices,
    sis_rejection_control,
    solve_next_h,
)
from .weights import (
    effective_sample_size,
    normalise_weights,
    weighted_kernel_mass,
)

__version__ = "0.1.0"
