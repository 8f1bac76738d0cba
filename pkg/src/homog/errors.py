"""Exception hierarchy shared by every module of the toolkit."""


class HomogError(Exception):
    """Base class for all toolkit errors."""


class SpecError(HomogError, ValueError):
    """Malformed Hamiltonian description or JSON document."""


# hamiltonian core
class OutOfFiberBox(HomogError):
    pass


class NotSuperlinear(HomogError):
    pass


class InvalidWidth(HomogError, ValueError):
    pass


class UnboundedRegion(HomogError):
    pass


# cell problem
class NonConvexSpec(HomogError):
    pass


class NoConvergence(HomogError):
    pass


class DimensionNot1(HomogError):
    pass


class RootBracketingFailure(HomogError):
    def __init__(self, message, q=None):
        super().__init__(message)
        self.q = q


class CFLViolation(HomogError):
    pass


class UnstableBlowup(HomogError):
    pass


class SampleError(HomogError):
    """Wraps a per-sample failure in a batch run, carrying the offending p."""

    def __init__(self, p, cause):
        super().__init__(f"failed at p={p!r}: {cause}")
        self.p = p
        self.cause = cause


# mather
class EmptyInput(HomogError, ValueError):
    pass


class NonUniformGrid(HomogError, ValueError):
    pass


class MinimumOnBoundary(HomogError):
    pass


class InfeasibleWinding(HomogError, ValueError):
    pass


# symplectic metrics
class NotCompactlySupported(HomogError):
    pass


class QuadratureNotConverged(HomogError):
    pass


class ExtensionNotVanishing(HomogError):
    pass


class PlateauNotReached(HomogError):
    pass


# counterexample
class DeltaTooLarge(HomogError, ValueError):
    pass


class CutoffOverlap(HomogError):
    pass


class SufficiencyViolated(HomogError):
    pass
