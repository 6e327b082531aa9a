"""Exception hierarchy shared by all samplers.

Every failure mode that a caller may want to react to programmatically has
its own class; the CLI maps these onto exit codes.
"""


class AbcError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(AbcError):
    """An argument violated a documented precondition (non-finite value,
    dimension mismatch, unnormalised weights, ...)."""


class ConfigurationError(AbcError):
    """A configuration object or file is inconsistent or incomplete."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        # list of (line_number or None, message) pairs; populated by the
        # config parser so callers can report every problem at once
        self.errors = errors if errors is not None else []


class RegistrationError(ConfigurationError):
    """Model registry misuse (duplicate or unknown model name)."""


class ProposalSupportError(AbcError):
    """A proposal density evaluated to zero at a point it sampled."""


class DegeneratePopulationError(AbcError):
    """Total particle collapse: every raw weight is zero."""


class DegenerateSelectionError(DegeneratePopulationError):
    """A post-hoc selection (e.g. tolerance truncation) kept no samples."""


class BudgetExhaustedError(AbcError):
    """A simulation budget or retry cap was exceeded."""


class InitialisationError(BudgetExhaustedError):
    """An MCMC chain could not find a starting point with positive kernel
    mass within the allowed number of attempts."""


class StuckIterationError(BudgetExhaustedError):
    """A race-to-hit MCMC iteration exceeded its per-iteration simulation
    cap (reports the two states involved)."""


class StageFailureError(BudgetExhaustedError):
    """A sequential-sampler stage exhausted its attempt budget."""

    def __init__(self, message, stage=None, statistics=None):
        super().__init__(message)
        self.stage = stage
        self.statistics = statistics or {}


class BoundViolationError(AbcError):
    """A probability that must be at most one exceeded it: the rejection
    envelope constant or the early-rejection gate bound is too small."""


class ScheduleStallError(AbcError):
    """The adaptive tolerance solver cannot reach the requested effective
    sample size for any positive tolerance."""


class OracleResolutionError(AbcError):
    """A quadrature oracle grid is too coarse to resolve the kernel scale."""
