"""Exception types raised across the package."""


class UBIError(Exception):
    """Base class for all errors raised by sparse_ubi."""


class NonFiniteInput(UBIError, ValueError):
    pass


class ShapeMismatch(UBIError, ValueError):
    pass


class ConfigError(UBIError, ValueError):
    pass


class DomainError(UBIError, ValueError):
    pass


class ZeroVector(UBIError, ValueError):
    pass


class DependentColumns(UBIError):
    pass


class NotSymmetric(UBIError, ValueError):
    pass


class ConvergenceFailure(UBIError):
    pass


class GenerationFailure(UBIError):
    pass


class NoConsensus(UBIError):
    """RANSAC could not find a model supported by ``min_inliers`` points.

    This is a signal rather than a fault; ``best_count`` holds the size of
    the largest inlier set seen.
    """

    def __init__(self, best_count: int, min_inliers: int):
        super().__init__(
            f"best consensus has {best_count} inliers, need {min_inliers}"
        )
        self.best_count = best_count
        self.min_inliers = min_inliers


class SubspaceShortfall(UBIError):
    """Fewer subspaces than expected were found. ``partial`` holds them."""

    def __init__(self, found: int, expected: int, partial=None):
        super().__init__(f"found {found} of {expected} subspaces")
        self.found = found
        self.expected = expected
        self.partial = partial


class IncompleteOcs(UBIError):
    pass


class CombinatorialBudgetExceeded(UBIError):
    pass


class IdentificationTimeout(UBIError):
    """Outer-pass budget ran out before ``n`` mixing vectors were found."""

    def __init__(self, clusters_found: int, expected: int, partial=None, state=None):
        super().__init__(
            f"identified {clusters_found} of {expected} mixing vectors"
        )
        self.clusters_found = clusters_found
        self.expected = expected
        self.partial = partial
        self.state = state
