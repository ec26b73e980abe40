"""Exception hierarchy shared across the package."""


class DriftlabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DriftlabError, ValueError):
    """Invalid domain, grid, drift, or experiment configuration."""


class EmptySubdomainError(ConfigurationError):
    """A shrink distance leaves no interior nodes."""


class ContractViolation(DriftlabError, ValueError):
    """An operation was called outside its documented preconditions."""


class SolverDivergenceError(DriftlabError, ArithmeticError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite solution at time step {step}")
