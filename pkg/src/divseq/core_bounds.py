"""Crossing budgets, CGF envelopes, Legendre duals, and anytime radii.

Everything downstream reduces to one pattern: pick a CGF envelope for the
centered statistic at a conservative sample index, spend part of the error
budget through a stitching function, and invert the Legendre dual at the
resulting crossing level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import (
    MissingSecondIndex,
    MonotonicityViolated,
    NonConvexTable,
    OutOfRange,
)

_ZETA_TERMS = 10**7
_CHUNK = 10**6


@lru_cache(maxsize=64)
def _zeta(alpha: float) -> float:
    """Riemann zeta by direct summation plus an integral tail correction.

    Partial sum of 1e7 terms, then the Euler-Maclaurin tail starting at the
    next integer. Accurate to well below 1e-12 for alpha >= 1.25.
    """
    if alpha <= 1.0:
        raise ValueError("zeta(alpha) requires alpha > 1")
    total = 0.0
    for start in range(1, _ZETA_TERMS + 1, _CHUNK):
        stop = min(start + _CHUNK, _ZETA_TERMS + 1)
        block = np.arange(start, stop, dtype=np.float64)
        total += float(np.sum(block ** (-alpha)))
    a = float(_ZETA_TERMS + 1)
    tail = a ** (1.0 - alpha) / (alpha - 1.0)
    tail += 0.5 * a ** (-alpha)
    tail += alpha / 12.0 * a ** (-alpha - 1.0)
    return total + tail


def _tail_sum(a: float, alpha: float) -> float:
    # sum_{n >= a} n^-alpha for integer a, Euler-Maclaurin to three terms
    return (
        a ** (1.0 - alpha) / (alpha - 1.0)
        + 0.5 * a ** (-alpha)
        + alpha / 12.0 * a ** (-alpha - 1.0)
    )


@dataclass(frozen=True)
class StitchingFunctions:
    """Per-epoch error allocation for geometrically spaced sample indices.

    ell(k) = (1 or k)^alpha * zeta(alpha) splits a one-stream budget so that
    sum_{k>=1} 1/ell(k) = 1. g(k) = e * (2 or k)^(alpha+1) *
    (zeta(alpha) - zeta(alpha+1)) splits a two-stream budget so that
    sum_{j,k>=0} e/g(j+k+2) = 1; the leading e absorbs the maximal-inequality
    factor for exchangeable pairs.
    """

    alpha: float = 2.0
    eta: float = 2.0
    xi: float = 2.0

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise ValueError("alpha must exceed 1")
        if self.eta <= 1.0 or self.xi <= 1.0:
            raise ValueError("epoch bases eta, xi must exceed 1")

    @classmethod
    def create(cls, alpha: float = 2.0, eta: float = 2.0, xi: float = 2.0):
        return cls(alpha=float(alpha), eta=float(eta), xi=float(xi))

    @classmethod
    def default(cls):
        return cls()

    @property
    def zeta_alpha(self) -> float:
        return _zeta(self.alpha)

    @property
    def zeta_alpha_plus_one(self) -> float:
        return _zeta(self.alpha + 1.0)

    def ell(self, k):
        return np.maximum(1.0, k) ** self.alpha * self.zeta_alpha

    def g(self, k):
        gap = self.zeta_alpha - self.zeta_alpha_plus_one
        return math.e * np.maximum(2.0, k) ** (self.alpha + 1.0) * gap

    def log_ell(self, k):
        return np.log(self.ell(k))

    def log_g(self, k):
        return np.log(self.g(k))

    def epoch_one(self, t):
        return np.log(t) / math.log(self.eta)

    def epoch_two(self, t, s):
        return np.log(t) / math.log(self.eta) + np.log(s) / math.log(self.xi)

    def budget_sums(self, k_max: int = 10**6) -> tuple[float, float]:
        """Both stitched error budgets: partial sum to k_max plus analytic tail.

        Returns (one_stream, two_streams); each equals 1 exactly, so the
        computed values certify the allocation when they land within
        tolerance of 1 without exceeding it.
        """
        k = np.arange(1, k_max + 1, dtype=np.float64)
        one = float(np.sum(1.0 / self.ell(k)))
        one += _tail_sum(float(k_max + 1), self.alpha) / self.zeta_alpha

        # pairs (j, k >= 0) grouped by m = j + k + 2; multiplicity m - 1
        m = np.arange(2, k_max + 1, dtype=np.float64)
        two = float(np.sum((m - 1.0) * math.e / self.g(m)))
        gap = self.zeta_alpha - self.zeta_alpha_plus_one
        a = float(k_max + 1)
        two += (_tail_sum(a, self.alpha) - _tail_sum(a, self.alpha + 1.0)) / gap
        return one, two


@dataclass(frozen=True, eq=False)
class CgfEnvelope:
    """Envelope of the cumulant generating function of a centered statistic.

    mean_bound is an upper bound on the expectation of the statistic itself;
    the envelope psi applies to the statistic minus its expectation.
    Tabulated envelopes are interpreted as the piecewise-linear hull of the
    given (lambda, psi) nodes, which errs on the conservative side for radii.
    """

    kind: str
    mean_bound: float = 0.0
    variance_proxy: float = 0.0
    scale: float = 0.0
    lambdas: Optional[np.ndarray] = None
    psi_values: Optional[np.ndarray] = None

    @classmethod
    def subgaussian(cls, mean_bound: float, variance_proxy: float):
        if variance_proxy < 0:
            raise ValueError("variance_proxy must be nonnegative")
        return cls("subgaussian", float(mean_bound), float(variance_proxy))

    @classmethod
    def subexponential(cls, mean_bound: float, variance_proxy: float, scale: float):
        if variance_proxy < 0:
            raise ValueError("variance_proxy must be nonnegative")
        if scale <= 0:
            raise ValueError("scale must be positive")
        return cls(
            "subexponential", float(mean_bound), float(variance_proxy), float(scale)
        )

    @classmethod
    def tabulated(cls, lambdas, psi_values, mean_bound: float = 0.0):
        lam = np.asarray(lambdas, dtype=np.float64)
        psi = np.asarray(psi_values, dtype=np.float64)
        if lam.ndim != 1 or lam.shape != psi.shape or lam.size < 2:
            raise ValueError("need matching 1-d grids with at least 2 nodes")
        if not (np.all(lam > 0) and np.all(np.diff(lam) > 0)):
            raise ValueError("lambda grid must be positive and increasing")
        if not np.all(np.isfinite(psi)):
            raise ValueError("psi values must be finite")
        slopes = np.diff(psi) / np.diff(lam)
        tol = 1e-12 * np.maximum(1.0, np.abs(slopes[:-1]))
        if np.any(np.diff(slopes) < -tol):
            raise NonConvexTable("chord slopes must be nondecreasing")
        return cls("tabulated", float(mean_bound), lambdas=lam, psi_values=psi)

    @classmethod
    def tabulated_from_function(
        cls,
        psi: Callable[[np.ndarray], np.ndarray],
        lambda_max: float,
        mean_bound: float = 0.0,
        n_grid: int = 2048,
        lambda_min: Optional[float] = None,
    ):
        """Sample a CGF on a log-spaced grid of n_grid points."""
        lo = lambda_min if lambda_min is not None else lambda_max * 1e-6
        lam = np.geomspace(lo, lambda_max, n_grid)
        return cls.tabulated(lam, psi(lam), mean_bound=mean_bound)


def legendre_dual(envelope: CgfEnvelope, x: float) -> float:
    """sup_{lambda >= 0} (lambda (x - mean_bound) - psi(lambda)).

    Closed form for the parametric kinds. For tabulated envelopes the
    supremum over the piecewise-linear hull is attained at a grid node, so
    the grid maximum is exact (tolerance 0, well inside the documented 1e-8);
    accuracy against a smooth underlying psi is set by the grid resolution.
    """
    xc = x - envelope.mean_bound
    if xc <= 0.0:
        return 0.0
    if envelope.kind == "subgaussian":
        if envelope.variance_proxy == 0.0:
            return math.inf
        return xc * xc / (2.0 * envelope.variance_proxy)
    if envelope.kind == "subexponential":
        s2, a = envelope.variance_proxy, envelope.scale
        if xc <= s2 / a:
            return xc * xc / (2.0 * s2)
        return xc / a - s2 / (2.0 * a * a)
    if envelope.kind == "tabulated":
        return float(np.max(envelope.lambdas * xc - envelope.psi_values))
    raise ValueError(f"unknown envelope kind {envelope.kind!r}")


def dual_inverse(envelope: CgfEnvelope, y: float) -> float:
    """Smallest x at or above mean_bound whose dual reaches level y.

    Negative levels clamp to zero, giving back mean_bound. Zero variance
    envelopes return mean_bound for every level.
    """
    y = max(0.0, float(y))
    mu = envelope.mean_bound
    if y == 0.0:
        return mu
    if envelope.kind == "subgaussian":
        return mu + math.sqrt(2.0 * y * envelope.variance_proxy)
    if envelope.kind == "subexponential":
        s2, a = envelope.variance_proxy, envelope.scale
        if y < s2 / (2.0 * a * a):
            return mu + math.sqrt(2.0 * s2 * y)
        return mu + a * y + s2 / (2.0 * a)
    if envelope.kind == "tabulated":
        crossings = (y + envelope.psi_values) / envelope.lambdas
        i = int(np.argmin(crossings))
        if i == envelope.lambdas.size - 1:
            raise OutOfRange(
                "level exceeds the dual range of the tabulated grid; "
                "extend the grid to larger lambda"
            )
        return mu + float(crossings[i])
    raise ValueError(f"unknown envelope kind {envelope.kind!r}")


@dataclass(frozen=True)
class RadiusRequest:
    """Inputs for a stitched radius.

    t (and s for two streams) are the observed sample sizes; the conservative
    working indices ceil(t / ceil(eta)), ceil(s / ceil(xi)) are computed
    internally. delta_side is the error budget assigned to this one side.
    """

    t: int
    delta_side: float
    stitching: StitchingFunctions
    s: Optional[int] = None

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be at least 1")
        if self.s is not None and self.s < 1:
            raise ValueError("s must be at least 1")
        if not 0.0 < self.delta_side < 1.0:
            raise ValueError("delta_side must lie in (0, 1)")


def _tbar(t: int, base: float) -> int:
    return math.ceil(t / math.ceil(base))


def one_sample_radius(
    envelope_family: Callable[[int], CgfEnvelope], request: RadiusRequest
) -> float:
    """Radius for a single stream at sample size t.

    envelope_family maps the working index tbar to the envelope of the
    centered statistic at that size.
    """
    st = request.stitching
    tbar = _tbar(request.t, st.eta)
    y = float(st.log_ell(st.epoch_one(request.t))) + math.log(1.0 / request.delta_side)
    return dual_inverse(envelope_family(tbar), y)


def two_sample_radius(
    envelope_family: Callable[[int, int], CgfEnvelope], request: RadiusRequest
) -> float:
    """Radius for two independent streams at sizes (t, s)."""
    if request.s is None:
        raise MissingSecondIndex("two_sample_radius needs request.s")
    st = request.stitching
    tbar = _tbar(request.t, st.eta)
    sbar = _tbar(request.s, st.xi)
    y = float(st.log_g(st.epoch_two(request.t, request.s))) + math.log(
        1.0 / request.delta_side
    )
    return dual_inverse(envelope_family(tbar, sbar), y)


def paired_radius(
    envelope_family: Callable[[int, int], CgfEnvelope],
    t: int,
    delta_side: float,
    stitching: StitchingFunctions,
) -> float:
    """Radius for two streams observed in lockstep (t = s).

    A single epoch index suffices, so the one-stream budget ell applies at
    the shared working index.
    """
    tbar = _tbar(t, stitching.eta)
    y = float(stitching.log_ell(stitching.epoch_one(t))) + math.log(1.0 / delta_side)
    return dual_inverse(envelope_family(tbar, tbar), y)


def subgaussian_radius(mean_bound, variance_proxy, crossing_log):
    """mean_bound + sqrt(2 * variance_proxy * crossing_log), elementwise.

    Negative crossing levels clamp to zero. Accepts arrays.
    """
    y = np.maximum(0.0, crossing_log)
    return mean_bound + np.sqrt(2.0 * variance_proxy * y)


def maximal_tail_bound(envelope: CgfEnvelope, u: float, two_sample: bool = False):
    """Crossing probability bound exp(-dual(u)) for the running maximum.

    The two-stream version carries an extra factor e from the maximal
    inequality for exchangeable pairs. Clipped to [0, 1].
    """
    p = math.exp(-legendre_dual(envelope, u))
    if two_sample:
        p *= math.e
    return min(1.0, p)


def monotonicity_check(
    radius_fn: Callable, t_max: int, rel_tol: float = 1e-12
) -> tuple[bool, Optional[int]]:
    """Scan t = 1..t_max for any rise in radius_fn beyond relative tolerance.

    Tries a single vectorized call first, falling back to a scalar loop.
    Returns (True, None) when nonincreasing, else (False, first t whose
    value exceeds its predecessor).
    """
    ts = np.arange(1, t_max + 1, dtype=np.float64)
    vals = None
    try:
        out = np.asarray(radius_fn(ts), dtype=np.float64)
        if out.shape == ts.shape:
            vals = out
    except Exception:
        vals = None
    if vals is None:
        vals = np.fromiter(
            (float(radius_fn(t)) for t in range(1, t_max + 1)),
            dtype=np.float64,
            count=t_max,
        )
    bad = np.nonzero(vals[1:] > vals[:-1] + rel_tol * np.abs(vals[:-1]))[0]
    if bad.size:
        return False, int(bad[0]) + 2
    return True, None


def forward_boundary(
    envelope_family: Callable[[int], CgfEnvelope],
    t: int,
    delta: float,
    stitching: StitchingFunctions,
) -> float:
    """Upper boundary 2 * gamma_t for forward-growing level sequences.

    gamma_tau inverts the dual at log ell(epoch) + log(2/delta) with the
    envelope taken at tau itself (no index halving). Valid only when gamma
    is nondecreasing over 1..t; otherwise raises MonotonicityViolated.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    levels = np.empty(t, dtype=np.float64)
    for tau in range(1, t + 1):
        y = float(stitching.log_ell(stitching.epoch_one(tau))) + math.log(2.0 / delta)
        levels[tau - 1] = dual_inverse(envelope_family(tau), y)
    drop = np.nonzero(levels[1:] < levels[:-1] - 1e-12 * np.abs(levels[:-1]))[0]
    if drop.size:
        raise MonotonicityViolated(
            f"level sequence decreases at t={int(drop[0]) + 2}"
        )
    return 2.0 * float(levels[-1])
