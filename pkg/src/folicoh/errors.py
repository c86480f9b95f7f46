"""Exception hierarchy shared across the package."""


class FolicohError(Exception):
    """Base class for all library errors."""


class ShapeMismatch(FolicohError):
    """Differential matrices do not chain (cols of d_{k+1} != rows of d_k)."""


class NotValidated(FolicohError):
    """Cohomology requested for a complex whose d^2 = 0 check fails."""


class BadModel(FolicohError):
    """Foliation model parameters violate the model invariants."""


class UnsupportedTruncation(FolicohError):
    """Truncation order below the minimum the model supports."""


class LambdaOne(FolicohError):
    """Carriere primitive requested for lambda = 1 (the degenerate case)."""


class Unsupported(FolicohError):
    """Operation not defined for this model kind."""


class NotClosed(FolicohError):
    """Twisting 1-form is not a cocycle."""


class TruncationOverflow(FolicohError):
    """A wedge product leaves the truncated span; offending products attached."""

    def __init__(self, message, overflow=None):
        super().__init__(message)
        self.overflow = list(overflow or [])


class ExpOverflow(FolicohError):
    """Projected exponential in a gauge transform exceeds its residual budget."""


class SingularMetric(FolicohError):
    """Chart metric loses positive-definiteness on the sample grid."""


class ZeroVector(FolicohError):
    """Flow field vanishes somewhere on the chart."""


class NotBasic(FolicohError):
    """Function expected to be basic varies along the leaves."""


class BadCover(FolicohError):
    """Mayer-Vietoris cover violates the cover invariants."""


class DegreeOutOfRange(FolicohError):
    """Requested cohomological degree outside the complex's range."""


class QuadratureUnstable(FolicohError):
    """Pairing entries did not settle under quadrature grid refinement."""


class FixtureMissing(FolicohError):
    """No embedded table fixture for the requested parameter."""


class SchemaError(FolicohError):
    """Model descriptor failed JSON parsing or schema validation."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column
