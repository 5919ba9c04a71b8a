"""Exception types shared across the package."""


class ConnectomlError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ConnectomlError, ValueError):
    """Input data or configuration violates a documented contract."""


class NumericalError(ConnectomlError, RuntimeError):
    """A numerical routine failed to produce a usable result."""
