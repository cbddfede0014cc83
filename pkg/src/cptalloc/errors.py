"""Package-level exception types."""


class CptAllocError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(CptAllocError):
    """A run configuration is malformed or violates a parameter constraint."""


class NumericalError(CptAllocError):
    """A numerical routine failed to converge or the problem is ill-posed."""
