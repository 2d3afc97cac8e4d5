"""Exception types raised across the package."""


class DivseqError(Exception):
    """Base class for all divseq errors."""


class OutOfRange(DivseqError):
    """Requested value lies outside the representable range."""


class MissingSecondIndex(DivseqError):
    """A two-sample operation was called without the second sample size."""


class NonConvexTable(DivseqError):
    """A tabulated CGF failed the convexity check."""


class MonotonicityViolated(DivseqError):
    """A boundary that must be monotone in t failed the scan."""


class AbsoluteContinuityViolated(DivseqError):
    """Empirical mass found outside the support of the reference law."""


class UnbalancedMarginals(DivseqError):
    """Transport marginals do not sum to the same total mass."""


class UnsupportedDimension(DivseqError):
    """Operation implemented only for a restricted dimension."""


class KindMismatch(DivseqError):
    """Configured divergence kind does not match the requested operation."""


class EmptySample(DivseqError):
    """An estimator was given an empty sample."""


class DimensionMismatch(DivseqError):
    """Vector lengths or dimensions disagree."""


class InsufficientData(DivseqError):
    """Too few observations for the requested statistic."""


class ExactTooLarge(DivseqError):
    """Exact enumeration requested beyond the supported size."""


class CertificateFailed(DivseqError):
    """A numerical certificate (duality gap, truncation bound) did not hold."""
