"""Exception hierarchy and process exit codes.

Every failure mode the command-line tools can hit maps onto one of four
documented nonzero exit codes, so that sweep drivers and CI scripts can
dispatch on the cause without parsing messages:

    0  success
    2  configuration problem (unreadable/invalid config, bad mesh, resource caps)
    3  inadmissible physics (kernel hypotheses, coercivity, b - g2_total <= 0,
       non-positive-definite effective matrix)
    4  numerical failure at runtime (divergence, eigensolver breakdown)
    5  energy-decrement identity violation in verification mode
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ADMISSIBILITY = 3
EXIT_DIVERGENCE = 4
EXIT_IDENTITY = 5


class SimulationError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigurationError(SimulationError):
    """Invalid or inconsistent user input (config file, mesh, initial data)."""

    exit_code = EXIT_CONFIG


class ResourceLimitError(ConfigurationError):
    """A requested computation exceeds a configured hard cap."""


class AdmissibilityError(SimulationError):
    """Material/kernel data violate the hypotheses the scheme relies on."""

    exit_code = EXIT_ADMISSIBILITY


class NonIntegrableKernelError(AdmissibilityError):
    """Relaxation kernel is not integrable on [0, inf)."""


class StabilityError(AdmissibilityError):
    """Effective Newmark matrix is not positive definite."""


class DivergenceError(SimulationError):
    """Non-finite state or unbounded energy growth during time stepping."""

    exit_code = EXIT_DIVERGENCE


class NumericalError(SimulationError):
    """A linear-algebra kernel failed (factorization, eigensolve)."""

    exit_code = EXIT_DIVERGENCE


class IdentityViolationError(SimulationError):
    """Observed and predicted energy decrements disagree beyond tolerance.

    This is the primary correctness tripwire: it fires when the assembled
    matrices, the history bookkeeping, and the energy evaluation are not
    mutually consistent.
    """

    exit_code = EXIT_IDENTITY


class InsufficientDataError(ConfigurationError):
    """Too few usable samples for a requested fit."""
