"""Exception types shared across the package."""


class PercolabError(Exception):
    """Base class for all package errors."""


class EncodingError(PercolabError, ValueError):
    """An object is not a valid canonical encoding of a group element."""


class SpecError(PercolabError, ValueError):
    """A construction was requested for a group or rule it does not support."""


class InputError(PercolabError, ValueError):
    """Malformed user input (configs, marginals, probabilities)."""


class ResourceError(PercolabError, RuntimeError):
    """A configured budget (memory, enumeration size, region radius) was exceeded."""


class ConeError(PercolabError, ValueError):
    """A pattern does not cover the dependency cone needed for exact evolution."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class ConsistencyError(PercolabError, AssertionError):
    """An internal invariant that must hold by construction was violated."""
