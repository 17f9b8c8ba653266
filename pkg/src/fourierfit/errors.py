"""Exception hierarchy shared by all modules.

``ValidationError`` covers bad inputs (CLI exit code 2), ``NumericError``
covers numerical failures (CLI exit code 3).
"""


class FourierFitError(Exception):
    """Base class for all package errors."""


class ValidationError(FourierFitError, ValueError):
    pass


class NumericError(FourierFitError, ArithmeticError):
    pass


class InvalidSpaceError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class TableParseError(ValidationError):
    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"record {position}: {message}"
        super().__init__(message)
        self.position = position


class TableValidationError(ValidationError):
    pass


class IncompleteDataError(ValidationError):
    pass


class SymmetryError(ValidationError):
    pass


class ResolutionError(ValidationError):
    pass
