"""
Exception hierarchy for the ndk-svm toolkit.

Every error raised by the library derives from ``NdkSvmError``. Each class
carries the process exit code the command-line interface uses when the error
reaches it:

- 1: usage / invalid parameters
- 2: input and output problems (missing files, malformed lines)
- 3: numeric failures (non-convergence, singular covariance)
"""

from typing import Any, Optional

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class NdkSvmError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = EXIT_USAGE


class InvalidParameterError(NdkSvmError, ValueError):
    """A hyperparameter, ratio or grid is outside its valid range."""


class DimensionMismatchError(NdkSvmError, ValueError):
    """Two vectors, or a vector and a model, disagree on dimension."""

    def __init__(self, expected: int, actual: int, what: str = "vector"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"Dimension mismatch for {what}: expected {expected}, got {actual}")


class KernelMismatchError(NdkSvmError, ValueError):
    """The operation requires a model with a different kernel."""


class DataFormatError(NdkSvmError, ValueError):
    """
    A data file could not be parsed.

    Attributes:
    -----------
    path : str, optional
        File in which the problem was found.
    line_number : int, optional
        1-based line number of the offending line.
    """

    exit_code = EXIT_IO

    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        self.path = path
        self.line_number = line_number
        location = ""
        if path is not None:
            location = f"{path}"
            if line_number is not None:
                location += f":{line_number}"
            location += ": "
        elif line_number is not None:
            location = f"line {line_number}: "
        super().__init__(f"{location}{message}")


class DataIOError(NdkSvmError, OSError):
    """An input file or directory is missing or unreadable."""

    exit_code = EXIT_IO


class NumericError(NdkSvmError, ArithmeticError):
    """Base class for numeric failures."""

    exit_code = EXIT_NUMERIC


class ConvergenceError(NumericError):
    """
    SMO training did not converge within its iteration budget.

    The best model found so far and a short diagnostic are kept so that
    callers can still inspect or use the partial result.
    """

    def __init__(self, message: str, best_model: Any = None, diagnostic: Optional[dict] = None):
        self.best_model = best_model
        self.diagnostic = diagnostic or {}
        super().__init__(message)


class SingularCovarianceError(NumericError):
    """The covariance matrix has non-positive eigenvalues and no ridge was allowed."""


class InternalConsistencyError(NumericError):
    """A computed quantity violated an identity that must hold (e.g. imaginary residue)."""
