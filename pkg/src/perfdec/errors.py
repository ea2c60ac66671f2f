"""Exception types shared across the package.

The CLI maps these onto exit codes: plain ``ValueError`` (bad arguments,
mismatched shapes) -> 2, ``FormatError`` -> 3, ``NumericalError`` and its
subclasses -> 4.
"""


class FormatError(ValueError):
    """A file violates one of the on-disk format contracts."""


class NumericalError(RuntimeError):
    """A numerical routine failed or produced unusable output."""


class DegenerateInputError(NumericalError):
    """Structurally valid input that is numerically unusable (e.g. an all-zero AIF)."""


class UndefinedMetricError(ValueError):
    """The requested metric is undefined for the given inputs (e.g. single-class AUC)."""
