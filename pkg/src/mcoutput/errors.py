"""Exception types shared across the package."""


class OutputAnalysisError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(OutputAnalysisError):
    """Array shapes or column counts do not line up."""


class DataError(OutputAnalysisError):
    """Input values are unusable (non-finite, non-numeric, wrong checksum)."""


class ParseError(DataError):
    """A delimited text file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParameterError(OutputAnalysisError):
    """A configuration value is outside its admissible range."""


class InsufficientDataError(OutputAnalysisError):
    """The chain is too short for the requested computation."""


class DegenerateDataError(OutputAnalysisError):
    """The data carry no variation where variation is required."""


class SingularEstimateError(OutputAnalysisError):
    """A covariance estimate is not positive definite where it must be."""


class NumericsError(OutputAnalysisError):
    """An iterative numeric routine failed to converge."""


class DegreesOfFreedomError(OutputAnalysisError):
    """Too few degrees of freedom for the requested distribution."""


class UsageError(OutputAnalysisError):
    """The command line was invoked with inconsistent arguments."""
