"""Exception types shared across the package.

DataError covers anything wrong with inputs (missing files, schema
violations, graphs without the labels a routine needs). NumericError
covers runtime numeric failures such as a NaN loss. The CLI maps these
to distinct exit codes.
"""


class DataError(ValueError):
    """Input data is missing, malformed, or violates an invariant."""


class NumericError(RuntimeError):
    """A numeric computation produced a non-finite or degenerate result."""
