"""Exception hierarchy.

Two families matter to callers: :class:`DataError` (the input is malformed or
violates an assumption) and :class:`NumericalError` (the input is fine but a
matrix turned out singular or ill-conditioned).  The command line maps them to
exit codes 2 and 3.
"""


class StructLoewnerError(Exception):
    """Base class.  ``stage`` is filled in by :func:`structloewner.solver.realize`."""

    stage = None

    def __str__(self):
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class DataError(StructLoewnerError, ValueError):
    pass


class NumericalError(StructLoewnerError, ArithmeticError):
    pass


# structure
class DomainError(DataError):
    pass


class StructureError(DataError):
    pass


class IndependenceError(StructureError):
    pass


class ParseError(DataError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        exp = ", ".join(sorted(self.expected))
        detail = f" (expected one of: {exp})" if exp else ""
        super().__init__(f"{message} at byte {offset}{detail}")


class SingularKernel(NumericalError):
    def __init__(self, s, rcond):
        self.s = s
        self.rcond = rcond
        super().__init__(f"K(s) is singular at s={s!r} (reciprocal condition {rcond:.3e})")


# data
class OracleError(DataError):
    def __init__(self, s, cause):
        self.s = s
        super().__init__(f"oracle failed at s={s!r}: {cause}")


class DuplicatePointError(DataError):
    pass


class NotClosedError(DataError):
    pass


class ClosureError(DataError):
    pass


class SizeMismatchError(DataError):
    pass


class OverlapError(DataError):
    pass


class MissingThetaError(DataError):
    pass


class MissingHermiteDataError(DataError):
    pass


class ZeroSampleError(DataError):
    def __init__(self, point):
        self.point = point
        super().__init__(f"zero sample at s={point!r} makes the P matrix singular")


# numerics
class TransformSingularError(NumericalError):
    def __init__(self, points):
        self.points = list(points)
        super().__init__(f"h_2 vanishes at {self.points}")


class DenominatorError(NumericalError):
    pass


class RegularityError(NumericalError):
    pass


class DegenerateDataError(NumericalError):
    pass


class RankError(NumericalError):
    pass


class RankMismatchError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    def __init__(self, message, smallest_singular_value=None, residual=None):
        self.smallest_singular_value = smallest_singular_value
        self.residual = residual
        super().__init__(message)


class HaarViolationError(NumericalError):
    def __init__(self, index, ratio):
        self.index = index
        super().__init__(
            f"per-entry system for entry {index} is singular (sigma_min/sigma_max={ratio:.2e});"
            " the points likely violate the Haar condition for this basis"
        )


class SingularSystemWarning(UserWarning):
    pass


class ConditioningWarning(UserWarning):
    pass


class RealityError(NumericalError):
    """A real-valued transform left imaginary parts above tolerance."""
