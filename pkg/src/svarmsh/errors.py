"""Exception hierarchy shared across the package and mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Unusable input data: wrong shape, too short, unreadable (CLI exit code 3)."""


class NumericalError(RuntimeError):
    """Numerical failure: degenerate likelihood, singular matrices, no stationary
    distribution (CLI exit code 4)."""
