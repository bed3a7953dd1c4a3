"""Exception hierarchy.

``NumericError`` subclasses signal a breakdown of the numerics (the CLI maps
them to exit code 3); ``ValidationError`` signals a malformed configuration.
"""


class DressingError(Exception):
    pass


class ValidationError(DressingError, ValueError):
    pass


class NumericError(DressingError, ArithmeticError):
    pass


class PoleProximity(NumericError):
    def __init__(self, point, root, distance):
        self.point = point
        self.root = root
        self.distance = distance
        super().__init__(
            f"evaluation point {point!r} lies {distance:.3g} from pole {root!r}"
        )


class NotSimpleRoot(NumericError):
    pass


class DiagonalProximity(NumericError):
    pass


class OrderOverflow(NumericError):
    pass


class CircleHitsSingularity(NumericError):
    pass


class DegenerateDenominator(NumericError):
    def __init__(self, rcond, message=None):
        self.rcond = rcond
        super().__init__(
            message or f"denominator determinant is numerically singular (rcond={rcond:.3g})"
        )


class EvaluationAtDivisor(NumericError):
    pass


class NonConvergent(NumericError):
    pass


class TruncationOverflow(NumericError):
    pass


class GridBounds(NumericError, IndexError):
    pass


class ContourTooTight(NumericError):
    pass


class RankDeficientFit(NumericError):
    pass


class UnknownField(DressingError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
