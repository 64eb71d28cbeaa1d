"""Exception hierarchy shared by all modules."""


class DecentStabError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(DecentStabError, ValueError):
    """Array shapes are inconsistent with the requested operation."""


class DomainError(DecentStabError, ValueError):
    """An argument lies outside the domain of the operation."""


class AssumptionViolation(DecentStabError):
    """A plant fails one of the rank conditions required for synthesis.

    ``condition`` names the failed hypothesis (``"rank(B)"``, ``"rank(C)"``,
    ``"rank(CB)"``, ``"CB Hurwitz H-matrix"`` or ``"minimum phase"``).
    """

    def __init__(self, condition, message):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


class NumericalError(DecentStabError, ArithmeticError):
    """A numerical routine failed or produced an inconsistent answer."""


class DivergenceError(NumericalError):
    """An integrated state left the representable range."""

    def __init__(self, time, message=None):
        super().__init__(message or f"state diverged at t={time!r}")
        self.time = time


class CertificateError(DecentStabError):
    """A scaled input-output matrix is not strictly column-dominant."""


class ScheduleValidationError(DecentStabError, ValueError):
    """A gain schedule drops below its floor after the activation time.

    ``violations`` lists ``(channel, time)`` pairs.
    """

    def __init__(self, violations):
        head = ", ".join(f"(j={j}, t={t:.6g})" for j, t in violations[:10])
        more = "" if len(violations) <= 10 else f" and {len(violations) - 10} more"
        super().__init__(f"gain below floor at {head}{more}")
        self.violations = list(violations)


class PreconditionError(DecentStabError, ValueError):
    """A sampled precondition fails; ``time`` is the first offending sample."""

    def __init__(self, time, message):
        super().__init__(message)
        self.time = time


class FitError(DecentStabError, ValueError):
    """Not enough usable samples to fit a decay rate."""
