"""Knockoff filter with aggregation of multiple knockoffs (AKO)."""

from .aggregation import (
    AggregationResult,
    AkoConfig,
    bh_select,
    by_select,
    quantile_aggregate,
    run_ako,
)
from .core_numerics import RngStream, cholesky, derive_stream, sample_mvn, toeplitz_covariance
from .inference import (
    KAPPA,
    KnockoffRun,
    intermediate_pvalues,
    knockoff_threshold,
    lcd_statistic,
    run_ko,
    vanilla_select,
)
from .knockoffs import GaussianModel, equicorrelated_s, estimate_gaussian, gaussian_model, sample_knockoffs
from .lasso import LassoFit, lambda_max, lasso_cd, select_lambda_cv
from .simulation import SimConfig, fdp_and_power, generate_dataset

__version__ = "0.1.0"
