class ValidationError(ValueError):
    """
    Base class for rejected inputs: shapes, ranges, documents and expressions
    """


class DimensionMismatchError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class InadmissiblePairError(ValidationError):
    pass


class GroupSpecError(ValidationError):
    pass


class DegenerateInputError(ValidationError):
    pass


class ResourceLimitError(ValidationError):
    pass


class MalformedExpressionError(ValidationError):
    """Raised by the multiplier mini-language parser; carries the offending offset"""

    def __init__(self, message: str, expression: str, position: int):
        self.expression = expression
        self.position = position
        super().__init__(f"{message} at position {position}: {expression!r}")


class NumericalQualityError(ArithmeticError):
    """
    Base class for computations that ran but cannot certify their output
    """


class QuadratureError(NumericalQualityError):
    pass


class ConvergenceError(NumericalQualityError):
    pass


class FiniteDifferenceError(NumericalQualityError):
    pass


class GridResolutionError(NumericalQualityError):
    pass


class BoundaryMassError(NumericalQualityError):
    pass


class ChebyshevTailError(NumericalQualityError):
    pass
