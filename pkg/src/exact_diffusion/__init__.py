"""Exact simulation of one-dimensional diffusions with one drift discontinuity.

The library draws skeletons of dX = alpha(X) dt + dB, where alpha may jump at
level zero, without any discretisation bias: endpoint pairs come from a
local-time-tilted law, interior points from exact Brownian/local-time bridge
samplers, and path-level acceptance from Poisson thinning.  An Euler-Maruyama
baseline and a statistical validation harness ship alongside.
"""

from .algorithm import Skeleton, sample_paths, simulate_skeleton, thinning_accept
from .bridges import (
    BridgeQuery,
    CaseWeights,
    EndpointPair,
    UVRegion,
    compute_case_weights,
    interpolate_skeleton,
    prob_local_time_constant,
    sample_B_conditional_zero_increment,
    sample_bridge_point,
    sample_L_given_endpoints,
    sample_xi1,
    sample_xi2,
    sample_xi3,
    xi1_density,
    xi2_density,
    xi3_density,
)
from .distributions import (
    LocalTimeDensityQuery,
    atom_density_fstar,
    joint_density_f,
    normal_cdf,
    normal_pdf,
    sample_poisson_times,
    sample_truncated_normal,
    sample_truncated_rayleigh,
)
from .drift import (
    DriftSpec,
    SkeletonPoint,
    make_piecewise_constant,
    make_piecewise_sine,
    phi,
    validate_assumptions,
)
from .endpoint import (
    EndpointLaw,
    build_endpoint_law,
    build_mixture,
    gstar_tilde,
    gtilde,
    sample_endpoint,
    sample_endpoint_theta_negative,
    sample_endpoint_theta_positive,
    sample_XT_from_h,
)
from .errors import (
    ConfigError,
    DomainError,
    DriftValidationError,
    EnvelopeViolationError,
    ExactDiffusionError,
    QuadratureError,
    RoundLimitError,
    UnsupportedDriftError,
)
from .rng import RngStream
from .validation import (
    DensityGrid,
    euler_maruyama,
    kde,
    ks_two_sample,
    levy_identity_oracle,
    quadrature_cdf,
)

__version__ = "0.1.0"

__all__ = [
    "BridgeQuery",
    "CaseWeights",
    "ConfigError",
    "DensityGrid",
    "DomainError",
    "DriftSpec",
    "DriftValidationError",
    "EndpointLaw",
    "EndpointPair",
    "EnvelopeViolationError",
    "ExactDiffusionError",
    "LocalTimeDensityQuery",
    "QuadratureError",
    "RngStream",
    "RoundLimitError",
    "Skeleton",
    "SkeletonPoint",
    "UnsupportedDriftError",
    "UVRegion",
    "atom_density_fstar",
    "build_endpoint_law",
    "build_mixture",
    "compute_case_weights",
    "euler_maruyama",
    "gstar_tilde",
    "gtilde",
    "interpolate_skeleton",
    "joint_density_f",
    "kde",
    "ks_two_sample",
    "levy_identity_oracle",
    "make_piecewise_constant",
    "make_piecewise_sine",
    "normal_cdf",
    "normal_pdf",
    "phi",
    "prob_local_time_constant",
    "quadrature_cdf",
    "sample_B_conditional_zero_increment",
    "sample_bridge_point",
    "sample_endpoint",
    "sample_endpoint_theta_negative",
    "sample_endpoint_theta_positive",
    "sample_L_given_endpoints",
    "sample_paths",
    "sample_poisson_times",
    "sample_truncated_normal",
    "sample_truncated_rayleigh",
    "sample_XT_from_h",
    "sample_xi1",
    "sample_xi2",
    "sample_xi3",
    "simulate_skeleton",
    "thinning_accept",
    "validate_assumptions",
    "xi1_density",
    "xi2_density",
    "xi3_density",
]
