"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems are handled by argparse
(exit 1), ConfigError/DataError exit 2, NumericalError exits 3.
"""


class TiltLabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TiltLabError):
    """A configuration is internally inconsistent or violates an invariant."""


class DataError(TiltLabError):
    """Input data is malformed, insufficient, or inconsistent."""


class UnmatchedTokenError(DataError):
    """A bracketed sentence has unmatched heads or tails.

    ``positions`` lists the offending 1-based positions.
    """

    def __init__(self, message, positions):
        super().__init__(message)
        self.positions = list(positions)


class CheckpointError(DataError):
    """A checkpoint file failed version, checksum, or shape validation."""


class NumericalError(TiltLabError):
    """Training produced NaN/Inf values and was aborted."""
