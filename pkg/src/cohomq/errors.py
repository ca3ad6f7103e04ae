"""Exception types shared across the package."""


class CohomqError(Exception):
    """Base class for errors raised by cohomq."""


class ConfigError(CohomqError, ValueError):
    """Invalid input: violated precondition, unknown name, malformed document."""


class NumericalError(CohomqError, RuntimeError):
    """A numerical procedure failed (no bracket, no convergence, lost definiteness)."""
