"""Anytime-valid confidence sequences for convex divergences."""

from .core_bounds import (
    CgfEnvelope,
    RadiusRequest,
    StitchingFunctions,
    dual_inverse,
    forward_boundary,
    legendre_dual,
    maximal_tail_bound,
    monotonicity_check,
    one_sample_radius,
    paired_radius,
    subgaussian_radius,
    two_sample_radius,
)
from .estimators import (
    CategoricalCounts,
    CostSpec,
    KernelSpec,
    MmdStream,
    RademacherEstimate,
    G_k_t,
    kl_finite,
    ks_one_sample,
    ks_two_sample,
    log_G_k_t,
    mmd_u_squared,
    mmd_v,
    ot_cost_discrete,
    rademacher_empirical,
    smoothed_estimators_1d,
    tv_finite,
    w1_1d,
)
from .confseq import (
    MODE_AS_STATED,
    MODE_DERIVATION,
    BoundaryPair,
    ConfSeqConfig,
    ConfSeqState,
    IntervalRecord,
    dkw_boundary,
    entropy_bound,
    kappa_upper,
    kl_finite_boundary,
    kl_gamma_curve,
    ks_two_sample_boundary,
    mean_boundary,
    mmd_boundary,
    mmd_ustat_boundary,
    monitor_update,
    new_state,
    ot_boundary,
    rademacher_bound,
    rademacher_population_lower,
    smoothed_boundary,
    smoothing_constants,
    triangle_compose,
    tv_finite_boundary,
)
from . import errors

__version__ = "0.1.0"

__all__ = [
    "BoundaryPair",
    "CategoricalCounts",
    "CgfEnvelope",
    "ConfSeqConfig",
    "ConfSeqState",
    "CostSpec",
    "G_k_t",
    "IntervalRecord",
    "KernelSpec",
    "MODE_AS_STATED",
    "MODE_DERIVATION",
    "MmdStream",
    "RademacherEstimate",
    "RadiusRequest",
    "StitchingFunctions",
    "dkw_boundary",
    "dual_inverse",
    "entropy_bound",
    "errors",
    "forward_boundary",
    "kappa_upper",
    "kl_finite",
    "kl_finite_boundary",
    "kl_gamma_curve",
    "ks_one_sample",
    "ks_two_sample",
    "ks_two_sample_boundary",
    "legendre_dual",
    "log_G_k_t",
    "maximal_tail_bound",
    "mean_boundary",
    "mmd_boundary",
    "mmd_u_squared",
    "mmd_ustat_boundary",
    "mmd_v",
    "monitor_update",
    "monotonicity_check",
    "new_state",
    "one_sample_radius",
    "ot_boundary",
    "ot_cost_discrete",
    "paired_radius",
    "rademacher_bound",
    "rademacher_empirical",
    "rademacher_population_lower",
    "smoothed_boundary",
    "smoothed_estimators_1d",
    "smoothing_constants",
    "subgaussian_radius",
    "triangle_compose",
    "tv_finite_boundary",
    "two_sample_radius",
    "w1_1d",
]
