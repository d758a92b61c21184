"""Exception types shared across the library."""


class DilatoxError(Exception):
    """Base class for all dilatox errors."""


class DimensionMismatch(DilatoxError):
    """Point coordinates do not match the model dimension."""


class NonFiniteInput(DilatoxError):
    """A coordinate or coefficient is NaN or infinite."""


class NonPositiveScalar(DilatoxError):
    """Dilatation coefficients must be positive finite reals."""


class DomainViolation(DilatoxError):
    """Points fall outside the working domain of an operation."""


class ChartViolation(DomainViolation):
    """A sphere-model operation left the hemisphere chart."""


class InvalidModel(DilatoxError):
    """Model parameters violate a structural invariant."""


class UnitCoefficient(DilatoxError):
    """Coefficient product 1 gives no contraction, hence no fixed point."""


class NotLinearModel(DilatoxError):
    """The operation needs a model whose dilatations commute exactly."""


class NoConvergence(DilatoxError):
    """An iteration or limit estimate failed to converge."""


class ConfigParseError(DilatoxError):
    """Run configuration is malformed."""


class UnsupportedFormat(DilatoxError):
    """Requested report format does not apply to this payload."""
