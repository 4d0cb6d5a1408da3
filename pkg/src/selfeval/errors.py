"""Exception hierarchy shared by the library and the CLI.

The CLI maps these to exit codes: ParameterError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class SelfEvalError(Exception):
    """Base class for all selfeval errors."""


class ParameterError(SelfEvalError):
    """Invalid argument or configuration value."""


class DataError(SelfEvalError):
    """Malformed, missing, or mismatched data artifact."""


class NumericalError(SelfEvalError):
    """Non-finite or degenerate value encountered during computation."""
