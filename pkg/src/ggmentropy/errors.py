"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class ConvergenceError(ArithmeticError):
    """An iterative method hit its iteration cap."""


class InputFormatError(ValueError):
    """A file or serialized object does not match the expected layout."""


class CorruptStreamError(ValueError):
    """A bitstream failed its integrity check or could not be decoded."""
