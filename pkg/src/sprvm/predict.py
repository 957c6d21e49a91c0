"""Posterior-predictive point prediction with optional Monte Carlo errors.

The predicted value at x_new is the prediction row dotted with the Monte
Carlo posterior mean of beta.  Single-penalty fits carry a CLT-backed
standard error (batch means over the beta chain); multi-penalty fits do
not, because no convergence rate is known for that sampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diagnostics, kernels
from .data import Standardization
from .rvm import RvmDraws
from .sprvm import SprvmDraws


@dataclass(frozen=True)
class PredictionResult:
    """Point prediction on the raw response scale plus its standardized value.

    mcse is present (raw scale) iff method == "SPRVM".
    """

    point: float
    point_standardized: float
    mcse: float | None
    method: str
    m_used: int

    def __post_init__(self):
        if (self.method == "SPRVM") != (self.mcse is not None):
            raise ValueError("mcse must be present exactly for SPRVM results")
        if self.mcse is not None and self.mcse < 0:
            raise ValueError(f"mcse must be >= 0; got {self.mcse}")


def posterior_mean_beta(draws) -> np.ndarray:
    """Columnwise mean of the retained beta draws."""
    beta = np.asarray(draws.beta if hasattr(draws, "beta") else draws, dtype=float)
    if beta.ndim != 2 or beta.shape[0] < 1:
        raise ValueError("draws must be a non-empty (m, n+1) matrix")
    return beta.mean(axis=0)


def _method_of(draws) -> str:
    if isinstance(draws, SprvmDraws):
        return "SPRVM"
    if isinstance(draws, RvmDraws):
        return "RVM"
    raise TypeError(f"unsupported draws type: {type(draws).__name__}")


def _destandardize(value: float, standardization: Standardization | None) -> float:
    if standardization is None:
        return value
    return float(standardization.invert(value))


def point_predictions(
    draws,
    spec: kernels.KernelSpec,
    x_train,
    x_new_matrix,
    standardization: Standardization | None = None,
) -> np.ndarray:
    """Point predictions only, one per row of x_new_matrix (no MCSE).

    Used where standard errors are not wanted, e.g. cross-validation scoring
    with draw counts too small for a covariance estimate.
    """
    beta_bar = posterior_mean_beta(draws)
    x_new_matrix = np.atleast_2d(np.asarray(x_new_matrix, dtype=float))
    points = np.array(
        [
            float(kernels.prediction_row(spec, x_train, x_new) @ beta_bar)
            for x_new in x_new_matrix
        ]
    )
    if standardization is not None:
        points = standardization.invert(points)
    return points


def predict_point(
    draws,
    spec: kernels.KernelSpec,
    x_train,
    x_new,
    standardization: Standardization | None = None,
) -> PredictionResult:
    """Prediction at a single new covariate vector."""
    return predict_batch(draws, spec, x_train, np.atleast_2d(x_new), standardization)[0]


def predict_batch(
    draws,
    spec: kernels.KernelSpec,
    x_train,
    x_new_matrix,
    standardization: Standardization | None = None,
) -> list[PredictionResult]:
    """Predictions for each row of x_new_matrix.

    The CLT covariance estimate depends only on the beta chain, so it is
    computed once and reused across test points.
    """
    method = _method_of(draws)
    beta_bar = posterior_mean_beta(draws)
    x_new_matrix = np.atleast_2d(np.asarray(x_new_matrix, dtype=float))
    cov = diagnostics.batch_means_cov(draws.beta) if method == "SPRVM" else None
    sd = standardization.sd if standardization is not None else 1.0
    results = []
    for x_new in x_new_matrix:
        row = kernels.prediction_row(spec, x_train, x_new)
        point_std = float(row @ beta_bar)
        mcse = None
        if cov is not None:
            mcse = diagnostics.prediction_mcse(cov, row) * sd
        results.append(
            PredictionResult(
                point=_destandardize(point_std, standardization),
                point_standardized=point_std,
                mcse=mcse,
                method=method,
                m_used=draws.beta.shape[0],
            )
        )
    return results
