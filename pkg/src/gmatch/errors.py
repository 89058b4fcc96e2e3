"""Exception types shared across the package."""


class GMatchError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDepth(GMatchError):
    """Depth reading is missing, non-positive, or non-finite."""


class InsufficientCorrespondences(GMatchError):
    """Fewer point pairs than the solver needs."""


class DegenerateGeometry(GMatchError):
    """Point configuration does not constrain the transform (e.g. colinear)."""


class NotConsistent(GMatchError):
    """Pairwise distances of the two point sets disagree beyond tolerance."""


class ChiralityViolation(GMatchError):
    """Non-coplanar point sets related by a reflection, not a rotation."""


class MetricMismatch(GMatchError):
    """Feature metrics or vector kinds of two keypoint sets are incompatible."""


class InvalidParams(GMatchError):
    """Scene or config parameters out of range."""


class PoolTooLarge(GMatchError):
    """Candidate pool exceeds the exhaustive oracle's size limit."""


class NoConsensus(GMatchError):
    """RANSAC found no hypothesis with enough inliers."""


class NoOverlap(GMatchError):
    """ICP found no point associations under the initial pose."""


class ParseError(GMatchError):
    """File is malformed or violates the format invariants."""


class MetricUnknown(ParseError):
    """File declares a feature metric this package does not know."""


class InvalidDepthWarning(UserWarning):
    """Keypoint records dropped because their depth reading is unusable."""
