"""Exception hierarchy shared across the toolkit."""


class DichotomyError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DichotomyError):
    """Malformed system configuration; carries 1-based line/column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, col {column}: {message}"
        super().__init__(message)


class EvaluationError(DichotomyError):
    """Expression or matrix evaluation produced a non-finite value."""


class IntegrationError(DichotomyError):
    """Integrator step-size underflow or solution blow-up."""


class WindowError(DichotomyError):
    """Query outside the time window of an operator or grid."""


class RankInstabilityError(DichotomyError):
    """Projector rank changed across the estimation grid."""


class GapIndeterminateError(DichotomyError):
    """Singular values too close to 1 to split stable/unstable."""


class DegenerateFitError(DichotomyError):
    """Regression matrix rank-deficient (degenerate sampling)."""


class ReductionError(DichotomyError):
    """Lyapunov transform construction or conjugation failed."""


class SizeCapError(DichotomyError):
    """Lifted-operator dimension exceeds the configured cap."""


class NormalFormError(DichotomyError):
    """Normal-form solve failed (growth detected, grid mismatch, ...)."""
