"""Exception hierarchy.

Every error raised by this package derives from RmenccaError so callers can
catch the whole family at once.  The CLI maps each class to a distinct exit
code (see cli.EXIT_CODES).
"""
from __future__ import annotations


class RmenccaError(Exception):
    """Base class for all package errors."""


# dataset / shape problems
class DegenerateInput(RmenccaError):
    """Too few samples for the requested operation."""


class SampleCountMismatch(RmenccaError):
    """The two views disagree on the number of samples."""


class NonFiniteEntry(RmenccaError):
    """A view contains NaN or infinity."""


class RankBudgetTooLarge(RmenccaError):
    """k exceeds min(d1, d2, n)."""


class BatchTooLarge(RmenccaError):
    """batch_size exceeds the sample count."""


class DimensionMismatch(RmenccaError):
    """Matrix shapes are incompatible."""


# numerics
class InvalidSmoothing(RmenccaError):
    """zeta must be strictly positive."""


class AllZeroInput(RmenccaError):
    """Whitening impossible: the projected Gram is numerically zero."""


class NonFiniteIterate(RmenccaError):
    """An update produced NaN/inf or a diverging objective (try a smaller eta)."""


class SingularCovariance(RmenccaError):
    """Covariance eigenvalue below 1e-12 with ridge disabled."""


class RankDeficientBasis(RmenccaError):
    """A subspace basis does not have full column rank."""


# kernel
class InvalidKernelParam(RmenccaError):
    """Kernel parameter out of range (e.g. nonpositive width)."""


class TooLargeForKernel(RmenccaError):
    """Sample count too large to materialize an n x n Gram matrix."""


# file I/O
class RaggedRows(RmenccaError):
    """Rows of a delimited file have inconsistent widths."""


class NonNumericField(RmenccaError):
    """A delimited file field failed to parse as a float."""


class EmptyInput(RmenccaError):
    """No data rows found."""


class BadMagic(RmenccaError):
    """File does not start with the expected magic bytes."""


class TruncatedFile(RmenccaError):
    """File ended before the declared payload was read."""


class VersionMismatch(RmenccaError):
    """Model file written by an unsupported format version."""


class CorruptFile(RmenccaError):
    """Model file structure is inconsistent."""


class ConfigError(RmenccaError):
    """Invalid CLI configuration or flag combination."""
