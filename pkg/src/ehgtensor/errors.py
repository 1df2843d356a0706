"""Exception hierarchy shared by the library and the CLI.

Each class maps to one CLI exit code (see ``ehgtensor.cli.EXIT_CODES``).
"""


class EhgError(Exception):
    """Base class for every error raised on purpose by this package."""


class ArgumentError(EhgError, ValueError):
    """A caller passed an argument outside an operation's domain."""


class ConfigurationError(EhgError, ValueError):
    """A configuration object violates its invariants."""


class FormatError(EhgError, ValueError):
    """A file on disk does not follow the expected format.

    ``offset`` is the byte offset of the problem in binary files, if known.
    """

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class IngestionError(FormatError):
    """A CSV export could not be mapped onto the electrode grid."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(FormatError):
    """An annotation file parsed but failed semantic validation."""


class NumericalError(EhgError, ArithmeticError):
    """Inference hit a non-finite value or lost positive definiteness."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration


class UndefinedCorrelationError(ArgumentError):
    """Pearson correlation requested for a constant series."""
