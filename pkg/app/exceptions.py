"""Domain errors raised by the DPP services.

Every error derives from ``DPPError`` (itself a ``ValueError``) so callers can
catch the whole family at a boundary such as the CLI.
"""


class DPPError(ValueError):
    """Base class for all domain errors."""


class DimensionError(DPPError):
    """Operand shapes do not agree."""


class SymmetryError(DPPError):
    """A matrix that must be symmetric is not."""


class NotPSDError(DPPError):
    """A matrix that must be positive semidefinite has a negative pivot/eigenvalue."""


class SingularMatrixError(DPPError):
    """A matrix that must be invertible is singular within tolerance."""


class EmptyInputError(DPPError):
    """An operation received an empty vector, tensor or subset."""


class DegenerateFeatureError(DPPError):
    """A feature row is all zeros and cannot be normalised."""


class DegenerateQualityError(DPPError):
    """A quality vector has no strictly positive entry."""


class IndexRangeError(DPPError):
    """A subset index falls outside the ground set or repeats."""


class SubsetSizeError(DPPError):
    """A requested subset size is outside its admissible range."""


class OracleTooLargeError(DPPError):
    """Exhaustive enumeration would exceed the size guard."""


class UndefinedMetricError(DPPError):
    """A summary metric is undefined for the given input."""


class DivergenceError(DPPError):
    """Training loss grew beyond the divergence guard."""


class MemoryBudgetError(DPPError):
    """A benchmark size would exceed the configured memory budget."""


class InvalidParameterError(DPPError):
    """A scalar parameter is outside its admissible range."""


class InputFormatError(DPPError):
    """An input file cannot be parsed into the expected matrix, vector or record."""
