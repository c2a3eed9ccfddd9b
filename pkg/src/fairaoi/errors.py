"""Exception hierarchy shared across the package."""


class FairAoiError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FairAoiError, ValueError):
    """Invalid or inconsistent configuration values."""


class DomainError(FairAoiError, ValueError):
    """A quantity was evaluated outside its mathematical domain."""


class ModelInconsistencyError(FairAoiError, ValueError):
    """The collision model produced a probability ratio above one."""


class InfeasibleRatesError(FairAoiError, ValueError):
    """Service rate does not exceed re-evaluation rate on some link."""

    def __init__(self, message, link=None):
        super().__init__(message)
        self.link = link


class LinearizationDomainError(FairAoiError, ValueError):
    """A Taylor model was requested where log(1 - delta) is undefined."""


class SubproblemError(FairAoiError, RuntimeError):
    """The convex subproblem solver did not reach an optimal point."""


class SolverError(FairAoiError, RuntimeError):
    """An outer optimization loop failed; carries the iterates seen so far."""

    def __init__(self, message, iterates=None):
        super().__init__(message)
        self.iterates = list(iterates or [])


class ParseFailure(FairAoiError, ValueError):
    """A text completion could not be turned into a window vector."""


class NoConditioningEvents(FairAoiError, RuntimeError):
    """A conditional Monte-Carlo estimate had no samples to condition on."""
