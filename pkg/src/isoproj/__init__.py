"""Bayesian monotone regression through projection posteriors."""

from .conjugate import (
    Fixed,
    InverseGamma,
    PlugInMLE,
    PriorSpec,
    SigmaGrid,
    Type1,
    Type2,
    Type3,
    log_marginal_likelihood,
    marginal_mle_sigma2,
    posterior_over_J,
    posterior_params,
    sample_heights,
    sigma2_posterior,
)
from .data import (
    BinStats,
    DataError,
    Dataset,
    Partition,
    bin_stats,
    equispaced_partition,
    load_dataset,
    sample_knots_from_design,
)
from .inference import ProjectionSample, draw_projection_posterior, inheritance_check, summarize
from .isotonic import StepFunction, gcm_left_derivative, isotonic_l1, pava_l2, project
from .metrics import (
    EmpiricalWeights,
    StepDensity,
    Uniform,
    distance_to_monotone,
    hellinger_distance,
    lp_distance,
)
from .montest import TestConfig, TestResult, separation_curve, test_adaptive, test_fixedJ

__version__ = "0.1.0"
