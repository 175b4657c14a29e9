"""Exception hierarchy shared by every lscipad module.

The command line maps each family to a fixed exit code.
"""


class LsciPadError(Exception):
    exit_code = 1


class ConfigError(LsciPadError, ValueError):
    """Invalid shapes, hyperparameters, geometries or experiment settings."""

    exit_code = 1


class DataError(LsciPadError, ValueError):
    """Input data that violates a contract (labels, empty score lists, ...)."""

    exit_code = 2


class FormatError(DataError):
    """A sample or weight file whose header does not parse."""


class TruncatedFileError(DataError, IOError):
    """A file ended before its declared payload."""


class NumericError(LsciPadError, ArithmeticError):
    """NaN/Inf met during training."""

    exit_code = 3
