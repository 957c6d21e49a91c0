"""Kernel regression with single- and multi-penalty Gibbs samplers.

The single-penalty model keeps one precision on the whole coefficient
vector and a fixed noise precision, admits improper penalty priors with
checkable posterior propriety, and its geometrically ergodic sampler
supports honest Monte Carlo standard errors for predictions.  The
multi-penalty baseline is included for comparison (no standard errors: its
convergence rate is unknown).
"""

from ._backend import BACKEND
from .data import Dataset, SplitPlan, Standardization, kfold_plan, load_csv, make_synthetic, standardize_response, train_test_split
from .diagnostics import BatchMeansCov, PsrfReport, batch_means_cov, prediction_mcse, psrf, spectral_variance_cov
from .kernels import DesignMatrix, KernelSpec, build_design, check_condition_iii, check_full_row_rank, kernel_value, prediction_row
from .marglik import DIVERGENT, MarglikGrid, is_divergent, log_density_y_given_lambda, log_marginal_likelihood, optimize_marglik
from .predict import PredictionResult, point_predictions, posterior_mean_beta, predict_batch, predict_point
from .rvm import RvmConfig, RvmDraws, rvm_sample_beta, rvm_sample_inv_sigma2, rvm_sample_lambda_i
from .rvm import run_gibbs as rvm_run_gibbs
from .sprvm import DriftReport, ProprietyReport, SprvmConfig, SprvmDraws, check_propriety, drift_check, run_gibbs, sample_beta_given_lambda, sample_lambda_given_beta
from .tune import BenchReport, CvResult, SamplerBudget, benchmark, cross_validate, rmspe

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BatchMeansCov",
    "BenchReport",
    "CvResult",
    "DIVERGENT",
    "Dataset",
    "DesignMatrix",
    "DriftReport",
    "KernelSpec",
    "MarglikGrid",
    "PredictionResult",
    "ProprietyReport",
    "PsrfReport",
    "RvmConfig",
    "RvmDraws",
    "SamplerBudget",
    "SplitPlan",
    "SprvmConfig",
    "SprvmDraws",
    "Standardization",
    "batch_means_cov",
    "benchmark",
    "build_design",
    "check_condition_iii",
    "check_full_row_rank",
    "check_propriety",
    "cross_validate",
    "drift_check",
    "is_divergent",
    "kernel_value",
    "kfold_plan",
    "load_csv",
    "log_density_y_given_lambda",
    "log_marginal_likelihood",
    "make_synthetic",
    "optimize_marglik",
    "point_predictions",
    "posterior_mean_beta",
    "predict_batch",
    "predict_point",
    "prediction_mcse",
    "prediction_row",
    "psrf",
    "rmspe",
    "run_gibbs",
    "rvm_run_gibbs",
    "rvm_sample_beta",
    "rvm_sample_inv_sigma2",
    "rvm_sample_lambda_i",
    "sample_beta_given_lambda",
    "sample_lambda_given_beta",
    "spectral_variance_cov",
    "standardize_response",
    "train_test_split",
]
