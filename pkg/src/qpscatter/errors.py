"""Exception hierarchy shared by all modules."""


class ScatteringError(Exception):
    """Base class for numerical failures raised by qpscatter."""


class InvalidInput(ScatteringError, ValueError):
    """Input data violates a documented precondition."""


# surface
class QuadratureFailure(ScatteringError):
    pass


class SingularCurve(ScatteringError):
    pass


class TruncationTooSmall(ScatteringError):
    pass


class PathThroughBranchPoint(ScatteringError):
    pass


class RootOutsideGap(ScatteringError):
    pass


class NoConvergence(ScatteringError):
    pass


class AmbiguousSlit(ScatteringError):
    pass


# background
class ThetaZero(ScatteringError):
    pass


class PoleAtMu(ScatteringError):
    pass


class BranchPoint(ScatteringError):
    pass


class InstabilityDetected(ScatteringError):
    pass


# jost / scattering
class UnsupportedPoint(ScatteringError):
    pass


class RootRefinementFailure(ScatteringError):
    pass


class DegenerateZero(ScatteringError):
    pass


class GreenSolverFailure(ScatteringError):
    pass


class SlitAmbiguity(ScatteringError):
    pass


# glm
class TailTruncationTooLarge(ScatteringError):
    pass


class NotPositive(ScatteringError):
    pass


class IllConditioned(ScatteringError):
    pass


class ConsistencyFailure(ScatteringError):
    pass
