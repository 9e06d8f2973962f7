"""Exception hierarchy shared by every stage.

Input-family errors map to exit code 2, numerical-family errors to exit code 3.
"""
from typing import Optional

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class PhotonTomoError(Exception):
    exit_code = EXIT_INPUT


class InputError(PhotonTomoError, ValueError):
    exit_code = EXIT_INPUT


class FormatError(InputError):
    """Malformed or inconsistent file contents."""


class ConfigError(InputError):
    """Configuration document failed schema validation."""


class CapabilityError(InputError):
    """Request exceeds an implementation limit."""


class ExtractionError(InputError):
    def __init__(self, message: str, trace_index: Optional[int] = None):
        if trace_index is not None:
            message = f"trace {trace_index}: {message}"
        super().__init__(message)
        self.trace_index = trace_index


class NumericalError(PhotonTomoError, ArithmeticError):
    exit_code = EXIT_NUMERICAL


class DegenerateInputError(NumericalError):
    pass


class IllConditionedError(NumericalError):
    pass


class NoExcessModeError(NumericalError):
    pass


class UndefinedStatisticError(NumericalError):
    pass


class UndersampledModeError(NumericalError):
    pass


class DeadDetectorError(NumericalError):
    pass


class SamplerConfigurationError(NumericalError):
    """The sampling grid does not hold the distribution's mass."""


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, PhotonTomoError):
        return exc.exit_code
    if isinstance(exc, OSError):
        return EXIT_INPUT
    return 1


class TruncationWarning(UserWarning):
    """A state lost more than the allowed probability mass to the Fock cutoff."""


class DegeneracyWarning(UserWarning):
    """Leading eigenvalues are too close to single out a mode."""
