"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class StressnasError(Exception):
    pass


class ConfigError(StressnasError):
    """Invalid configuration, CLI arguments, or graph construction."""


class DataError(StressnasError):
    """Missing, malformed, or inconsistent on-disk data."""


class NumericalError(StressnasError):
    """NaN/Inf encountered or a numerical routine failed to converge."""
