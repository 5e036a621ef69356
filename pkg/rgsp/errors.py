"""Exception and warning types raised across the rgsp package."""


class RgspError(Exception):
    """Base class for every error raised by rgsp."""


class InvalidStructure(RgspError, ValueError):
    """A shift operator violates the invariants of its declared kind."""


class InvalidParams(RgspError, ValueError):
    """Model or solver parameters are outside their valid range."""


class DimensionMismatch(RgspError, ValueError):
    """Operands do not share the dimensions an operation requires."""


ShapeMismatch = DimensionMismatch


class NonDiagonalizable(RgspError):
    """The eigenvector matrix is singular or too ill-conditioned to invert."""


class RankDeficient(RgspError):
    """A sampling or observation submatrix lacks the rank needed for recovery."""


class ZeroReference(RgspError, ValueError):
    """A normalized error was requested against an all-zero reference."""


class InfeasiblePerturbation(RgspError):
    """A perturbation asks for more flips than the graph can provide."""


class InvalidSelection(RgspError, ValueError):
    """Sampling indices are repeated or out of range."""


class SingularNoiseCov(RgspError):
    """The sampled noise covariance is not positive definite."""


class InfeasibleStart(RgspError):
    """No sampling set of the requested size yields a full-rank observation."""


class FrequencyBlind(RgspError):
    """The sampling node carries no energy on an active frequency."""


class NonConvergence(RgspError):
    """An iterative solver hit its iteration cap before its tolerance."""


class Divergence(RgspError):
    """An iterative solver's objective blew up."""


class StepTooLarge(RgspError, ValueError):
    """The step size exceeds the stability bound of the iteration."""


class ZeroRow(RgspError):
    """A filter row is identically zero, so row normalization is undefined."""


class InfeasibleCut(RgspError):
    """Dendrogram cuts at two resolutions do not nest."""


class InfeasibleProblem(RgspError):
    """A constrained program has no point meeting its constraints."""


class ConfigError(RgspError):
    """An experiment configuration failed validation."""


class RgspWarning(UserWarning):
    """Base class for warnings that accompany a flagged (not failed) result."""


class RankDeficientWarning(RgspWarning):
    pass


class IllConditionedWarning(RgspWarning):
    pass


class DegenerateSolutionWarning(RgspWarning):
    pass


class SingularSystemWarning(RgspWarning):
    pass
