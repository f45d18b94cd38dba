"""Exception types shared across the package."""


class QuditError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(QuditError, ValueError):
    """Local dimension or matrix shape is not acceptable."""


class SupportError(QuditError, ValueError):
    """Operator support is empty, repeated, or out of range."""


class NonHermitianError(QuditError, ValueError):
    """An observable or decomposition input is not hermitian."""


class NonUnitaryError(QuditError, ValueError):
    """A gate or reconstructed operator is not unitary within tolerance."""


class SymmetryViolationError(QuditError, ValueError):
    """A circuit instance does not commute with the declared charge."""


class GuardError(QuditError, ValueError):
    """A dense-simulation size guard was exceeded."""


class ConfigError(QuditError, ValueError):
    """Invalid experiment configuration."""


class ConsistencyError(QuditError, RuntimeError):
    """An internal cross-check failed (reconstruction or factorization)."""
