"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class LightDiCError(Exception):
    exit_code = 1


class InputError(LightDiCError, ValueError):
    """Bad arguments, out-of-range parameters, malformed inputs."""

    exit_code = 2


class ParseError(InputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BoundsError(InputError, IndexError):
    pass


class InsufficientDataError(InputError):
    """Not enough labelled nodes / eligible edges to build a split."""


class ValidationError(InputError):
    pass


class FormatError(LightDiCError):
    exit_code = 3


class StaleCacheError(FormatError):
    pass


class NumericError(LightDiCError, ArithmeticError):
    exit_code = 4


class TrainingError(NumericError):
    def __init__(self, message, epoch=None):
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)
        self.epoch = epoch


class VerificationFailure(LightDiCError):
    exit_code = 5
