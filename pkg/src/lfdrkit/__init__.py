"""Frequentist local false discovery rates.

Estimation of the average density of many test statistics, pointwise and
compound null-frequency scores, multiple-testing procedures with boundary
error control, and a seeded Monte Carlo harness for verifying the theory
at desk scale.
"""

from .core import (
    AssumptionError,
    BetaDensity,
    CapacityError,
    DegeneracyError,
    Density,
    DiscreteUniformGrid,
    DomainError,
    EstimationError,
    ExpFamilyPoly,
    FitError,
    GaussianLocation,
    GroundTruth,
    LocationMixture,
    LossSpec,
    MixtureDensity,
    PiecewiseConstant,
    PiecewiseLinear,
    Scale,
    StatVector,
    StudentT,
    TwoGroupsSpec,
    Uniform01,
    average_density,
    mixture_density,
    normalization_defect,
)
from .density import (
    ExpFamilyFit,
    MixtureFit,
    MonotoneDensityFit,
    density_loglik,
    grenander_fit,
    lindsey_fit,
    npmle_mixture_fit,
)
from .lfdr import (
    LfdrCurve,
    Pi0Estimate,
    lfdr_curve_eval,
    lfdr_ratio,
    oracle_lfdr,
    score_hypotheses,
    selection_window_pi0,
    storey_pi0,
)
from .procedures import (
    ErrorRates,
    Procedure,
    QValueVector,
    RejectionResult,
    WeightedLoss,
    bh_threshold,
    empirical_error_rates,
    fdp_hat,
    interval_fdp_estimate,
    lfdr_threshold_rule,
    perturb_grid_pvalues,
    q_values,
    support_line,
    support_line_objective,
    weighted_loss,
)
from .compound import (
    ClfdrGap,
    ClfdrResult,
    best_pe_rule,
    clfdr_exact,
    clfdr_vs_lfdr_gap,
)
from .simulate import (
    Bfdr,
    CalibrationCurve,
    DiscreteCE,
    DiscreteUniformNulls,
    Fdr,
    GGM,
    GaussianMeans,
    MfdrInterval,
    MonteCarloReport,
    OmegaSpec,
    PfdrInterval,
    Power,
    ProcedureConfig,
    SuperUniformCE,
    TwoGroupsBeta,
    calibration_experiment,
    discrete_limit_check,
    exp_family_null_density_check,
    generate,
    mc_error_rates,
    merge_reports,
    mfdr_pfdr_limit_check,
    replicate_rng,
)

__version__ = "0.1.0"
