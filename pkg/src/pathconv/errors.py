"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration errors exit 1, dataset
errors exit 2, numerical failures exit 3.
"""


class ConfigError(ValueError):
    """Invalid hyper-parameters, splits, or an architecture that cannot be built."""


class DatasetError(Exception):
    """Missing or malformed benchmark dataset files."""


class NumericalError(ArithmeticError):
    """Non-finite values encountered during training or optimization."""
