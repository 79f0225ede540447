"""False positive control lasso for generalized linear models."""

from .errors import (
    CampaignFailure,
    DegenerateColumn,
    DegenerateDenominator,
    DegenerateResponse,
    FpcError,
    NonConvergence,
    NumericalOverflow,
    OutOfRange,
    RegularityViolation,
    SaturatedFit,
    UnsupportedCorrelation,
    UnsupportedFamily,
)
from .fpc import (
    FpcSolution,
    FpcTarget,
    RegularityDiagnostic,
    fp_to_lambda,
    fpc_kkt_check,
    lambda_to_fp,
    prepare,
    regularity_check,
    solve_fpc,
)
from .glm import Coefficients, Dataset, Family, gradient, neg_log_likelihood, raw_residual
from .path import KktReport, LassoPath, PathConfig, fit_path, kkt_check, lambda_max, penalized_objective
from .preprocess import PreprocessRecord, orthogonalize_pca, preprocess, skew_adjust, standardize
from .rwsns import DistanceReport, RwsnsSampleSet, empirical_distance, lemma3_bounds, rwsns_statistic, sample_rwsns
from .simlab import (
    DesignSpec,
    ResponseSpec,
    SignalSpec,
    SimResult,
    gen_design,
    gen_response,
    post_hoc_fdr,
    run_corr_experiment,
    run_fp_experiment,
    run_tp_experiment,
)

__version__ = "0.1.0"
