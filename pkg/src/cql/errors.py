"""Exception types shared across the package.

Every error raised on purpose by this package is one of these (or a Python
builtin where that is the natural fit: TypeError / FileNotFoundError for
config parsing). Each subclass picks the closest builtin base so callers can
catch broadly if they want.
"""


class ShapeMismatch(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NotScalar(ValueError):
    """backward() was called on a tensor with more than one element."""


class AxisOutOfRange(IndexError):
    """An axis argument does not address any axis of the operand."""


class DomainError(ValueError):
    """A value lies outside the mathematical domain of the operation.

    Also raised when an op result would contain NaN/Inf: non-finite values
    are rejected at op boundaries.
    """


class ZeroNorm(ValueError):
    """A row that must be normalized has (numerically) zero length."""


class IndexOutOfRange(IndexError):
    """A layer/category/scene index addresses nothing."""


class InvalidSpec(ValueError):
    """A dataset specification violates its invariants."""


class DivergenceDetected(RuntimeError):
    """Training produced a non-finite loss."""


class UnknownKey(ValueError):
    """A config file contains a key the schema does not define."""


class BadMagic(ValueError):
    """A model file does not start with the expected magic bytes."""


class VersionMismatch(ValueError):
    """A model file uses an unsupported container format version."""


class TruncatedPayload(ValueError):
    """A model file's payload does not match its manifest."""
