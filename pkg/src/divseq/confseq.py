"""Anytime-valid boundaries for divergence functionals, plus a stream monitor.

Every boundary here holds simultaneously over all sample sizes: the returned
radius at (t, s) can be compared against the running estimate at every step
without any correction for optional stopping.  Functions take the full error
budget ``delta`` and perform their own internal split, so one delta governs
the whole time-uniform statement of a monitor.

Two-sample boundaries come in two evaluation modes.  ``as-stated`` uses the
compact closed-form constants; ``derivation-consistent`` rebuilds the radius
from the sub-Gaussian envelope at the ceiling-half indices ceil(t/2),
ceil(s/2).  The modes coincide at even equal sample sizes and differ by at
most a factor of 2*sqrt(2) elsewhere; defaults are per-boundary.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core_bounds import (
    CgfEnvelope,
    StitchingFunctions,
    dual_inverse,
    subgaussian_radius,
)
from .errors import (
    InsufficientData,
    KindMismatch,
    MonotonicityViolated,
    OutOfRange,
)
from .estimators import (
    CostSpec,
    KernelSpec,
    MmdStream,
    kl_finite,
    ks_one_sample,
    ks_two_sample,
    log_G_k_t,
    mmd_v,
    ot_cost_discrete,
    tv_finite,
)

MODE_AS_STATED = "as-stated"
MODE_DERIVATION = "derivation-consistent"
_MODES = (MODE_AS_STATED, MODE_DERIVATION)


class BoundaryPair(NamedTuple):
    """Lower radius and upper offset for an asymmetric interval."""

    gamma: float
    kappa: float


def _stitching(stitching: Optional[StitchingFunctions]) -> StitchingFunctions:
    return stitching if stitching is not None else StitchingFunctions.default()


def _check_t(t, name: str = "t") -> int:
    it = int(t)
    if it != t or it < 1:
        raise OutOfRange(f"{name} must be a positive integer, got {t!r}")
    return it


def _check_delta(delta: float) -> float:
    if not 0.0 < delta < 1.0:
        raise OutOfRange(f"delta must lie in (0, 1), got {delta!r}")
    return float(delta)


def _check_mode(mode: str) -> str:
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    return mode


def _half_up(n: int) -> int:
    return (n + 1) // 2


def _crossing_one(st: StitchingFunctions, t: int, log_inv: float) -> float:
    return float(st.log_ell(math.log2(t))) + log_inv


def _crossing_two(st: StitchingFunctions, t: int, s: int, log_inv: float) -> float:
    return float(st.log_g(math.log2(t) + math.log2(s))) + log_inv


def kappa_upper(t, delta, stitching=None, b_range: float = 1.0) -> float:
    """Upper-side offset for a plug-in functional with range b_range.

    The estimate exceeds the target in expectation, so the upper interval
    edge needs only the deviation of the estimate below its own mean; a
    quarter of the budget is spent per call, leaving room for a second
    stream and the lower radius.
    """
    st = _stitching(stitching)
    t = _check_t(t)
    delta = _check_delta(delta)
    if b_range <= 0:
        raise OutOfRange("b_range must be positive")
    x = _crossing_one(st, t, math.log(4.0 / delta))
    return b_range * math.sqrt(x / t)


def dkw_boundary(t, delta, stitching=None) -> float:
    """Time-uniform sup-distance radius between the empirical CDF and truth."""
    st = _stitching(stitching)
    t = _check_t(t)
    delta = _check_delta(delta)
    x = _crossing_one(st, t, math.log(1.0 / delta))
    return math.sqrt(math.pi / t) + 2.0 * math.sqrt((2.0 / t) * x)


def ks_two_sample_boundary(
    t, s, delta, stitching=None, mode: str = MODE_DERIVATION
) -> BoundaryPair:
    """Radius pair for the two-sample sup-distance plug-in.

    gamma bounds the statistic above the true distance (half the budget);
    kappa = kappa_t + kappa_s is the upper offset (a quarter per stream).
    """
    st = _stitching(stitching)
    t, s = _check_t(t), _check_t(s, "s")
    delta = _check_delta(delta)
    _check_mode(mode)
    x = _crossing_two(st, t, s, math.log(2.0 / delta))
    mean_term = math.sqrt(math.pi / t) + math.sqrt(math.pi / s)
    if mode == MODE_AS_STATED:
        dev = 2.0 * math.sqrt((2.0 * (t + s) / (t * s)) * x)
    else:
        tb, sb = _half_up(t), _half_up(s)
        sig2 = 2.0 * (tb + sb) / (tb * sb)
        dev = float(subgaussian_radius(0.0, sig2, x))
    kappa = kappa_upper(t, delta, st) + kappa_upper(s, delta, st)
    return BoundaryPair(mean_term + dev, kappa)


def mmd_boundary(
    t, s, delta, stitching=None, kernel_bound: float = 1.0, mode: str = MODE_AS_STATED
) -> BoundaryPair:
    """Radius pair for the kernel mean discrepancy plug-in (V-statistic)."""
    st = _stitching(stitching)
    t, s = _check_t(t), _check_t(s, "s")
    delta = _check_delta(delta)
    _check_mode(mode)
    b = float(kernel_bound)
    if b <= 0:
        raise OutOfRange("kernel_bound must be positive")
    x = _crossing_two(st, t, s, math.log(2.0 / delta))
    if mode == MODE_AS_STATED:
        gamma = 2.0 * math.sqrt(2.0 * b) * (t**-0.5 + s**-0.5) + 4.0 * math.sqrt(
            (b * (t + s) / (t * s)) * x
        )
    else:
        tb, sb = _half_up(t), _half_up(s)
        mu = 2.0 * (math.sqrt(b / tb) + math.sqrt(b / sb))
        kap2 = 8.0 * b * (tb + sb) / (tb * sb)
        gamma = float(subgaussian_radius(mu, kap2, x))
    kappa = 2.0 * math.sqrt(b) * (kappa_upper(t, delta, st) + kappa_upper(s, delta, st))
    return BoundaryPair(gamma, kappa)


def mmd_ustat_boundary(t, delta, stitching=None, kernel_bound: float = 1.0) -> float:
    """Radius for the paired squared-discrepancy U-statistic around truth."""
    st = _stitching(stitching)
    t = _check_t(t)
    delta = _check_delta(delta)
    if t < 2:
        raise InsufficientData("the paired statistic needs t >= 2")
    b = float(kernel_bound)
    if b <= 0:
        raise OutOfRange("kernel_bound must be positive")
    x = _crossing_one(st, t, math.log(1.0 / delta))
    return 16.0 * b * math.sqrt(x / (t - 1))


def ot_boundary(
    t,
    s,
    delta,
    stitching=None,
    cost_bound: float = 1.0,
    bias_bound: Optional[Callable[[int, int], float]] = None,
    mode: str = MODE_DERIVATION,
) -> BoundaryPair:
    """Radius pair for the transport-cost plug-in with bounded ground cost.

    ``bias_bound(tb, sb)`` must upper bound the expected plug-in excess at
    the ceiling-half sample sizes; it depends on the ground space, so the
    caller supplies it (for a k-point space with cost at most Delta,
    ``Delta/4 * (sqrt(k/tb) + sqrt(k/sb))`` works).
    """
    st = _stitching(stitching)
    t, s = _check_t(t), _check_t(s, "s")
    delta = _check_delta(delta)
    _check_mode(mode)
    if bias_bound is None:
        raise ValueError("bias_bound callable is required")
    d_cost = float(cost_bound)
    if d_cost <= 0:
        raise OutOfRange("cost_bound must be positive")
    tb, sb = _half_up(t), _half_up(s)
    alpha = float(bias_bound(tb, sb))
    x = _crossing_two(st, t, s, math.log(2.0 / delta))
    if mode == MODE_AS_STATED:
        inner = (t + s) / (t * s)
    else:
        inner = (tb + sb) / (tb * sb)
    gamma = alpha + 2.0 * d_cost * math.sqrt(inner * x)
    kappa = d_cost * (kappa_upper(t, delta, st) + kappa_upper(s, delta, st))
    return BoundaryPair(gamma, kappa)


def tv_finite_boundary(
    t, delta, stitching=None, alphabet_size: int = 2, mode: str = MODE_AS_STATED
) -> float:
    """Radius for the half-L1 plug-in on a k-category alphabet."""
    st = _stitching(stitching)
    t = _check_t(t)
    delta = _check_delta(delta)
    _check_mode(mode)
    k = int(alphabet_size)
    if k < 2:
        raise OutOfRange("alphabet_size must be at least 2")
    x = _crossing_one(st, t, math.log(1.0 / delta))
    if mode == MODE_AS_STATED:
        return 0.5 * math.sqrt(k / (2.0 * t)) + math.sqrt((2.0 / t) * x)
    tb = _half_up(t)
    return 0.25 * math.sqrt(k / tb) + math.sqrt(x / tb)


def _default_lambda_schedule(k: int) -> Callable[[int], float]:
    return lambda t: min(1.0, math.sqrt(k / t))


def _kl_gamma_single(st, t, delta, p, schedule, factor) -> float:
    lam = float(schedule(t))
    if not 0.0 < lam <= 1.0:
        raise OutOfRange(f"lambda schedule must stay in (0, 1], got {lam} at t={t}")
    tb = t // 2
    log_g = log_G_k_t(lam, p, tb) if tb >= 1 else 0.0
    x = log_g + _crossing_one(st, t, math.log(1.0 / delta))
    return (factor / (lam * t)) * x


def _kl_check(delta, p, factor):
    delta = _check_delta(delta)
    if p is None:
        raise ValueError("p (reference distribution) is required")
    pv = np.asarray(p, dtype=np.float64)
    if factor not in (1, 2):
        raise OutOfRange("factor must be 1 or 2")
    return delta, pv


def kl_gamma_curve(
    t_max, delta, stitching=None, p=None, lambda_schedule=None, factor: int = 2
) -> np.ndarray:
    """Relative-entropy radii for t = 1..t_max under a tilt schedule.

    The whole curve is computed so the nonincreasing requirement on the
    radius (the premise that makes the schedule admissible) can be checked
    as a hard error rather than a silent assumption.
    """
    st = _stitching(stitching)
    t_max = _check_t(t_max, "t_max")
    delta, pv = _kl_check(delta, p, factor)
    schedule = lambda_schedule or _default_lambda_schedule(pv.size)
    out = np.empty(t_max, dtype=np.float64)
    prev = math.inf
    for t in range(1, t_max + 1):
        g = _kl_gamma_single(st, t, delta, pv, schedule, factor)
        if g > prev + 1e-9:
            raise MonotonicityViolated(
                f"relative-entropy boundary rises at t={t} ({prev} -> {g}); "
                "the tilt schedule is not admissible"
            )
        out[t - 1] = g
        prev = g
    return out


def kl_finite_boundary(
    t,
    delta,
    stitching=None,
    p=None,
    lambda_schedule=None,
    factor: int = 2,
    verify: bool = True,
) -> float:
    """Relative-entropy radius at time t; verifies the curve up to t by default."""
    st = _stitching(stitching)
    t = _check_t(t)
    if verify:
        return float(
            kl_gamma_curve(
                t, delta, st, p=p, lambda_schedule=lambda_schedule, factor=factor
            )[-1]
        )
    delta, pv = _kl_check(delta, p, factor)
    schedule = lambda_schedule or _default_lambda_schedule(pv.size)
    return _kl_gamma_single(st, t, delta, pv, schedule, factor)


def smoothing_constants(d: int, sigma: float, tau2: float):
    """Dimension constants (c_d, C_d) for Gaussian-smoothed divergences."""
    if d < 1:
        raise OutOfRange("d must be at least 1")
    if sigma <= 0 or tau2 <= 0:
        raise OutOfRange("sigma and tau2 must be positive")
    base = 1.0 / math.sqrt(2.0) + math.sqrt(tau2) / sigma
    c_d = math.sqrt(2.0) * base ** (d / 2.0) * math.exp(3.0 * d / 16.0)
    c_big = 2.0 * math.sqrt(d * sigma**2) * base * c_d
    return c_d, c_big


def smoothed_boundary(
    t, delta, stitching=None, d: int = 1, sigma: float = 1.0, tau2: float = 1.0,
    which: str = "tv",
) -> float:
    """Radius for Gaussian-smoothed half-L1 ("tv") or transport ("w1") plug-ins.

    Smoothing restores the sqrt(1/t) rate in any fixed dimension; the
    dimension enters only through the constants of smoothing_constants.
    """
    st = _stitching(stitching)
    t = _check_t(t)
    delta = _check_delta(delta)
    c_d, c_big = smoothing_constants(d, sigma, tau2)
    x = _crossing_one(st, t, math.log(1.0 / delta))
    if which == "tv":
        return c_d / math.sqrt(t) + 4.0 * math.sqrt((2.0 / t) * x)
    if which == "w1":
        return c_big / math.sqrt(t) + 2.0 * math.sqrt((tau2 / t) * x)
    raise ValueError(f"which must be 'tv' or 'w1', got {which!r}")


def entropy_bound(
    t, delta, stitching=None, d: int = 1, sigma: float = 1.0,
    mixture_constant: float = None,
) -> float:
    """Radius for the differential entropy of the smoothed empirical measure.

    ``mixture_constant`` is the transport constant C_d of the matching
    smoothed boundary; it is data-scale dependent, so the caller supplies it.
    """
    st = _stitching(stitching)
    t = _check_t(t)
    delta = _check_delta(delta)
    if mixture_constant is None:
        raise ValueError("mixture_constant is required")
    if d < 1 or sigma <= 0:
        raise OutOfRange("d must be >= 1 and sigma positive")
    x = _crossing_one(st, t, math.log(4.0 / delta))
    rd = math.sqrt(d)
    return (3.0 * rd / sigma**2) * math.sqrt(x / t) + rd * mixture_constant / (
        math.sqrt(t) * sigma**2
    )


def rademacher_bound(
    t, delta, stitching=None, pop_complexity: Callable[[int], float] = None
) -> float:
    """Upper radius for the empirical symmetrization complexity.

    ``pop_complexity(tb)`` must bound the population complexity at the
    floor-half sample size floor(t/2); the empirical value plus this radius
    then dominates it uniformly in t.
    """
    st = _stitching(stitching)
    t = _check_t(t)
    delta = _check_delta(delta)
    if pop_complexity is None:
        raise ValueError("pop_complexity callable is required")
    if t < 2:
        raise OutOfRange("t must be at least 2 so the half index is positive")
    x = _crossing_one(st, t, math.log(1.0 / delta))
    return float(pop_complexity(t // 2)) + 2.0 * math.sqrt((2.0 / t) * x)


def rademacher_population_lower(emp_value: float, t, delta, stitching=None) -> float:
    """Companion lower bound on the floor-half population complexity."""
    st = _stitching(stitching)
    t = _check_t(t)
    delta = _check_delta(delta)
    x = _crossing_one(st, t, math.log(1.0 / delta))
    return float(emp_value) - 2.0 * math.sqrt((2.0 / t) * x)


def mean_boundary(
    t, delta, stitching=None, envelope: Optional[CgfEnvelope] = None, d: int = 1,
    gamma_cov: float = 0.5,
) -> float:
    """Norm radius around the running mean of d-dimensional observations.

    The direction sphere is discretized by a gamma_cov-net whose log size is
    paid inside the crossing level; d = 1 needs only the two signs, and the
    radius then collapses to 2 * dual_inverse at level 2x/t exactly.
    """
    st = _stitching(stitching)
    t = _check_t(t)
    delta = _check_delta(delta)
    if envelope is None:
        envelope = CgfEnvelope.subgaussian(0.0, 1.0)
    if d < 1:
        raise OutOfRange("d must be at least 1")
    if d == 1:
        x = _crossing_one(st, t, math.log(2.0 / delta))
        return float(dual_inverse(envelope, 2.0 * (x / t)))
    if not 0.0 < gamma_cov < 1.0:
        raise OutOfRange("gamma_cov must lie in (0, 1) for d >= 2")
    log_net = d * math.log(1.0 + 2.0 / gamma_cov)
    cross = (_crossing_one(st, t, math.log(1.0 / delta)) + log_net) / _half_up(t)
    return float(dual_inverse(envelope, cross)) / (1.0 - gamma_cov)


def triangle_compose(
    gamma_x: Callable[[int], float], gamma_y: Callable[[int], float]
) -> Callable[[int, int], float]:
    """Combine per-stream radii into a joint radius by pointwise addition.

    Valid whenever the target functional obeys the triangle inequality in
    each argument; each input radius should be built at half the budget.
    """

    def joint(t: int, s: int) -> float:
        return float(gamma_x(t)) + float(gamma_y(s))

    return joint


# --- streaming monitor ----------------------------------------------------

_KINDS = ("dkw", "ks", "mmd", "tv", "kl", "ot", "mean")
_ONE_SAMPLE = ("dkw", "tv", "kl", "mean")
_DEFAULT_MODES = {"ks": MODE_DERIVATION, "ot": MODE_DERIVATION}


def _uniform_cdf(q):
    return np.clip(q, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class ConfSeqConfig:
    """Immutable description of one monitored divergence.

    Only the fields relevant to ``kind`` are consulted:
      dkw   reference_cdf (default: Uniform(0,1))
      ks    mode
      mmd   kernel, mode
      tv    reference
      kl    reference, lambda_schedule, kl_factor
      ot    cost, bias_bound (default: finite-alphabet bound), mode
      mean  dimension, gamma_cov, envelope (default: 1-sub-Gaussian), mean_target
    """

    kind: str
    delta: float
    stitching: StitchingFunctions = field(default_factory=StitchingFunctions.default)
    mode: Optional[str] = None
    kernel: Optional[KernelSpec] = None
    cost: Optional[CostSpec] = None
    reference: Optional[np.ndarray] = None
    reference_cdf: Optional[Callable] = None
    envelope: Optional[CgfEnvelope] = None
    dimension: int = 1
    gamma_cov: float = 0.5
    mean_target: Optional[np.ndarray] = None
    bias_bound: Optional[Callable[[int, int], float]] = None
    lambda_schedule: Optional[Callable[[int], float]] = None
    kl_factor: int = 2

    def validated(self) -> "ConfSeqConfig":
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {', '.join(_KINDS)}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie strictly between 0 and 1")
        if self.mode is not None and self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.kind == "mmd" and self.kernel is None:
            raise ValueError("kernel is required for kind mmd")
        if self.kind == "ot":
            if self.cost is None:
                raise ValueError("cost is required for kind ot")
            if self.cost.kind != "matrix":
                raise ValueError("cost must be an explicit matrix for streaming")
            m = self.cost.matrix_values
            if m.shape[0] != m.shape[1]:
                raise ValueError("cost matrix must be square for streaming")
        if self.kind in ("tv", "kl"):
            if self.reference is None:
                raise ValueError(f"reference is required for kind {self.kind}")
            pv = np.asarray(self.reference, dtype=np.float64)
            if pv.ndim != 1 or pv.size < 2:
                raise ValueError("reference must be a 1-d vector over >= 2 categories")
            if abs(float(pv.sum()) - 1.0) > 1e-12 or np.any(pv < 0):
                raise ValueError("reference must be a probability vector")
            if self.kind == "kl" and np.any(pv == 0.0):
                raise ValueError("reference must be strictly positive for kind kl")
        if self.kind == "kl" and self.kl_factor not in (1, 2):
            raise ValueError("kl_factor must be 1 or 2")
        if self.kind == "mean":
            if self.dimension < 1:
                raise ValueError("dimension must be a positive integer")
            if self.dimension >= 2 and not 0.0 < self.gamma_cov < 1.0:
                raise ValueError("gamma_cov must lie in (0, 1)")
        return self

    def effective_mode(self) -> str:
        return self.mode or _DEFAULT_MODES.get(self.kind, MODE_AS_STATED)

    def alphabet_size(self) -> Optional[int]:
        if self.kind == "ot":
            return int(self.cost.matrix_values.shape[0])
        if self.kind in ("tv", "kl"):
            return int(np.asarray(self.reference).size)
        return None


@dataclass(frozen=True)
class IntervalRecord:
    """One monitor step: interval edges already floored at 0 and capped."""

    t: int
    s: int
    estimate: float
    lower: float
    upper: float
    reject_null: bool


class ConfSeqState:
    """Mutable accumulator behind monitor_update; create via new_state."""

    def __init__(self, config: ConfSeqConfig):
        self.config = config.validated()
        self.t = 0
        self.s = 0
        kind = config.kind
        if kind in ("dkw", "ks"):
            self._xs: list = []
            self._ys: list = []
        elif kind == "mmd":
            self._mmd = MmdStream(config.kernel)
        elif kind in ("tv", "kl", "ot"):
            k = config.alphabet_size()
            self._counts_x = np.zeros(k, dtype=np.int64)
            self._counts_y = np.zeros(k, dtype=np.int64)
        elif kind == "mean":
            self._sum = np.zeros(config.dimension, dtype=np.float64)
        if kind == "kl":
            self._prev_gamma = math.inf


def new_state(config: ConfSeqConfig) -> ConfSeqState:
    return ConfSeqState(config)


def _coerce_observation(cfg: ConfSeqConfig, observation):
    """Validate an observation without touching state; raises on bad input."""
    if cfg.kind in ("tv", "kl", "ot"):
        c = int(observation)
        if c != observation:
            raise ValueError(f"category must be an integer, got {observation!r}")
        k = cfg.alphabet_size()
        if not 0 <= c < k:
            raise ValueError(f"category {c} outside alphabet of size {k}")
        return c
    if cfg.kind == "mean":
        v = np.atleast_1d(np.asarray(observation, dtype=np.float64))
        if v.shape != (cfg.dimension,):
            raise ValueError(
                f"observation must have {cfg.dimension} coordinates, got {v.shape}"
            )
        return v
    if cfg.kind == "mmd":
        v = np.atleast_1d(np.asarray(observation, dtype=np.float64))
        if v.ndim != 1 or v.size < 1:
            raise ValueError("observation must be a scalar or flat vector")
        return v if v.size > 1 else float(v[0])
    return float(observation)


def _cap(cfg: ConfSeqConfig) -> float:
    if cfg.kind in ("dkw", "ks", "tv"):
        return 1.0
    if cfg.kind == "mmd":
        return 2.0 * math.sqrt(cfg.kernel.bound)
    if cfg.kind == "ot":
        return cfg.cost.delta
    return math.inf


def _ot_default_bias(cost_bound: float, k: int) -> Callable[[int, int], float]:
    return lambda tb, sb: 0.25 * cost_bound * (
        math.sqrt(k / tb) + math.sqrt(k / sb)
    )


def _estimate_and_radii(state: ConfSeqState):
    cfg = state.config
    t, s = state.t, state.s
    st = cfg.stitching
    delta = cfg.delta
    if cfg.kind == "dkw":
        cdf = cfg.reference_cdf or _uniform_cdf
        est = ks_one_sample(np.asarray(state._xs), cdf)
        gamma = dkw_boundary(t, 0.5 * delta, st)
        return est, gamma, kappa_upper(t, delta, st)
    if cfg.kind == "ks":
        est = ks_two_sample(np.asarray(state._xs), np.asarray(state._ys))
        gamma, kappa = ks_two_sample_boundary(
            t, s, delta, st, mode=cfg.effective_mode()
        )
        return est, gamma, kappa
    if cfg.kind == "mmd":
        est = state._mmd.value()
        gamma, kappa = mmd_boundary(
            t, s, delta, st, kernel_bound=cfg.kernel.bound, mode=cfg.effective_mode()
        )
        return est, gamma, kappa
    if cfg.kind == "tv":
        est = tv_finite(state._counts_x, cfg.reference)
        gamma = tv_finite_boundary(
            t, 0.5 * delta, st,
            alphabet_size=cfg.alphabet_size(),
            mode=cfg.effective_mode(),
        )
        return est, gamma, kappa_upper(t, delta, st)
    if cfg.kind == "kl":
        est = kl_finite(state._counts_x, cfg.reference)
        gamma = _kl_gamma_single(
            st, t, delta, np.asarray(cfg.reference, dtype=np.float64),
            cfg.lambda_schedule or _default_lambda_schedule(cfg.alphabet_size()),
            cfg.kl_factor,
        )
        # sequential pushes visit every t once, so this pairwise check is
        # exactly the admissibility scan of kl_gamma_curve
        if gamma > state._prev_gamma + 1e-9:
            raise MonotonicityViolated(
                f"relative-entropy boundary rises at t={t}; "
                "the tilt schedule is not admissible"
            )
        state._prev_gamma = gamma
        return est, gamma, math.inf
    if cfg.kind == "ot":
        mu = state._counts_x / t
        nu = state._counts_y / s
        est = ot_cost_discrete(mu, nu, cfg.cost)
        d_cost = cfg.cost.delta
        bias = cfg.bias_bound or _ot_default_bias(d_cost, cfg.alphabet_size())
        gamma, kappa = ot_boundary(
            t, s, delta, st,
            cost_bound=d_cost, bias_bound=bias, mode=cfg.effective_mode(),
        )
        return est, gamma, kappa
    # mean
    target = (
        np.zeros(cfg.dimension)
        if cfg.mean_target is None
        else np.asarray(cfg.mean_target, dtype=np.float64)
    )
    est = float(np.linalg.norm(state._sum / t - target))
    gamma = mean_boundary(
        t, delta, st,
        envelope=cfg.envelope, d=cfg.dimension, gamma_cov=cfg.gamma_cov,
    )
    return est, gamma, gamma


def monitor_update(
    state: ConfSeqState, observation, which_stream: str
) -> IntervalRecord:
    """Fold one observation into the monitor and return the current interval.

    Validation happens before any mutation, so a rejected observation
    leaves the state exactly as it was.
    """
    cfg = state.config
    side = str(which_stream).lower()
    if side not in ("x", "y"):
        raise KindMismatch(f"which_stream must be 'x' or 'y', got {which_stream!r}")
    if side == "y" and cfg.kind in _ONE_SAMPLE:
        raise KindMismatch(
            f"kind {cfg.kind} monitors a single stream; push to 'x'"
        )
    obs = _coerce_observation(cfg, observation)

    if cfg.kind in ("dkw", "ks"):
        (state._xs if side == "x" else state._ys).append(obs)
    elif cfg.kind == "mmd":
        if side == "x":
            state._mmd.push_x(obs)
        else:
            state._mmd.push_y(obs)
    elif cfg.kind in ("tv", "kl", "ot"):
        if side == "x":
            state._counts_x[obs] += 1
        else:
            state._counts_y[obs] += 1
    else:
        state._sum += obs
    if side == "x":
        state.t += 1
    else:
        state.s += 1

    cap = _cap(cfg)
    two_sample = cfg.kind not in _ONE_SAMPLE
    if two_sample and (state.t == 0 or state.s == 0):
        return IntervalRecord(state.t, state.s, 0.0, 0.0, cap, False)
    est, gamma, kappa = _estimate_and_radii(state)
    lower = max(0.0, est - gamma)
    upper = min(cap, est + kappa)
    return IntervalRecord(state.t, state.s, est, lower, upper, lower > 0.0)
