"""Exception and warning types raised across the toolkit."""


class LmorError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(LmorError, ValueError):
    pass


class SingularResolvent(LmorError):
    """The resolvent ``xi*E - A`` could not be solved at the requested point."""

    def __init__(self, message, index=None, point=None):
        super().__init__(message)
        self.index = index
        self.point = point


class EmptyGrid(LmorError, ValueError):
    pass


class IrregularPencil(LmorError):
    pass


class UnstableModel(LmorError):
    pass


class SingularE(LmorError):
    pass


class NonProperContinuous(LmorError):
    pass


class NonPositiveOmega(LmorError, ValueError):
    pass


# loewner
class DuplicatePoints(LmorError, ValueError):
    pass


class CoincidentLeftRight(LmorError, ValueError):
    pass


class AmbiguousRank(LmorError):
    pass


class NotConjugateClosed(LmorError, ValueError):
    pass


# reduction
class SingularProjectedE(LmorError):
    pass


class DefectivePoles(LmorError):
    pass


# stabilize
class BoundaryPole(LmorError):
    pass


# discretize
class HolderZero(LmorError):
    pass


class InvalidOrderBound(LmorError, ValueError):
    pass


class PoleAtMapSingularity(LmorError):
    pass


class NonStabilizable(LmorError):
    pass


# gustcase
class UnstableSimulation(LmorError):
    pass


class IncompatibleRates(LmorError, ValueError):
    pass


class ZeroBaselinePeak(LmorError):
    pass


# cli / pipeline
class ConfigParse(LmorError):
    pass


class ContractViolation(LmorError):
    """An output breaks a guaranteed property (e.g. an unstable model where stability is promised)."""


class StageFailure(LmorError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class NonConvergenceWarning(UserWarning):
    """Fixed-point iteration stopped at ``max_iter`` without meeting ``conv_tol``."""


class InsufficientDataWarning(UserWarning):
    """Loewner data have full numerical rank; minimality cannot be certified."""


class IllConditionedHankel(UserWarning):
    """Hankel-norm correction was ill conditioned; fell back to L2 projection."""
