"""Convergence diagnostics and Monte Carlo standard errors.

Gelman-Rubin potential scale reduction factors across parallel chains, the
batch-means estimator of the Markov chain CLT covariance (spectral variance
as an alternative), and the prediction-scale standard error
sqrt(k_new' (Sigma_hat / M) k_new).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError

# conventional warn threshold, not a hard criterion
PSRF_WARN_THRESHOLD = 1.1


@dataclass(frozen=True)
class PsrfReport:
    """Per-parameter potential scale reduction factors."""

    per_parameter: dict[str, float]
    max_psrf: float
    chains: int
    draws_per_chain: int

    def to_dict(self) -> dict:
        return {
            "per_parameter": dict(self.per_parameter),
            "max_psrf": self.max_psrf,
            "chains": self.chains,
            "draws_per_chain": self.draws_per_chain,
        }


def psrf(chains, names=None) -> PsrfReport:
    """Gelman-Rubin PSRF (1992 formulation, chains not split).

    chains: sequence of (draws, params) matrices of equal shape.  Per
    parameter, with N draws per chain, W the mean within-chain variance and
    B the between-chain variance, the reported value is
    sqrt(((N-1)/N W + B/N) / W), floored at 1 since the ratio can dip below
    1 by sampling noise.
    """
    mats = [np.atleast_2d(np.asarray(c, dtype=float)) for c in chains]
    mats = [c[:, None] if c.ndim == 1 else c for c in mats]
    if len(mats) < 2:
        raise ValueError("PSRF needs at least 2 chains")
    shape = mats[0].shape
    if any(c.shape != shape for c in mats):
        raise ValueError(
            f"chains have mismatched shapes: {[c.shape for c in mats]}"
        )
    n_draws, n_params = shape
    if n_draws < 10:
        raise ValueError(f"chains too short for PSRF; got {n_draws} draws")
    if names is None:
        names = [f"param_{j}" for j in range(n_params)]
    elif len(names) != n_params:
        raise ValueError(f"{len(names)} names for {n_params} parameters")
    stacked = np.stack(mats)  # (chains, draws, params)
    within = stacked.var(axis=1, ddof=1).mean(axis=0)
    means = stacked.mean(axis=1)
    between = n_draws * means.var(axis=0, ddof=1)
    values = {}
    for j, name in enumerate(names):
        w = float(within[j])
        if w <= 0.0:
            raise NumericError(
                f"zero within-chain variance for parameter {name!r}; PSRF undefined"
            )
        vhat = (n_draws - 1) / n_draws * w + float(between[j]) / n_draws
        values[name] = max(1.0, math.sqrt(vhat / w))
    return PsrfReport(
        per_parameter=values,
        max_psrf=max(values.values()),
        chains=len(mats),
        draws_per_chain=n_draws,
    )


@dataclass(frozen=True)
class BatchMeansCov:
    """Estimate of the Markov chain CLT covariance Sigma.

    m is the chain length the estimate was computed from (trailing draws
    beyond batch_size * batch_count are dropped by the batch-means method).
    """

    sigma_hat: np.ndarray
    batch_size: int
    batch_count: int
    m: int
    estimator: str = "batch-means"


def batch_means_cov(beta_draws) -> BatchMeansCov:
    """Batch-means estimator with batch size floor(sqrt(M)).

    Sigma_hat = b/(a-1) sum_k (mbar_k - mbar)(mbar_k - mbar)' over the a
    batch means mbar_k of size b.
    """
    draws = np.atleast_2d(np.asarray(beta_draws, dtype=float))
    if draws.ndim == 1:
        draws = draws[:, None]
    m = draws.shape[0]
    if m < 100:
        raise ValueError(f"batch means needs at least 100 draws; got {m}")
    b = int(math.floor(math.sqrt(m)))
    a = m // b
    used = draws[: a * b]
    batch_means = used.reshape(a, b, -1).mean(axis=1)
    centered = batch_means - batch_means.mean(axis=0)
    sigma = (b / (a - 1)) * (centered.T @ centered)
    sigma = 0.5 * (sigma + sigma.T)
    return BatchMeansCov(sigma_hat=sigma, batch_size=b, batch_count=a, m=m)


def spectral_variance_cov(beta_draws, truncation: int | None = None) -> BatchMeansCov:
    """Spectral variance estimator with a Tukey-Hanning window.

    Truncation defaults to floor(sqrt(M)).  Offered as an alternative to
    batch means behind the CLI --estimator flag.
    """
    draws = np.atleast_2d(np.asarray(beta_draws, dtype=float))
    if draws.ndim == 1:
        draws = draws[:, None]
    m = draws.shape[0]
    if m < 100:
        raise ValueError(f"spectral variance needs at least 100 draws; got {m}")
    t = int(math.floor(math.sqrt(m))) if truncation is None else int(truncation)
    if not 1 <= t < m:
        raise ValueError(f"truncation must be in [1, {m}); got {t}")
    centered = draws - draws.mean(axis=0)
    sigma = (centered.T @ centered) / m
    for k in range(1, t + 1):
        w = 0.5 * (1.0 + math.cos(math.pi * k / t))
        gamma_k = (centered[k:].T @ centered[:-k]) / m
        sigma = sigma + w * (gamma_k + gamma_k.T)
    sigma = 0.5 * (sigma + sigma.T)
    return BatchMeansCov(
        sigma_hat=sigma, batch_size=t, batch_count=0, m=m, estimator="spectral"
    )


def prediction_mcse(sigma_hat: BatchMeansCov, k_new) -> float:
    """Standard error of a prediction: sqrt(k_new' Sigma_hat k_new / M).

    A quadratic form that is negative within numerical tolerance is clamped
    to 0; a significantly negative one signals a broken covariance estimate
    and raises.
    """
    k_new = np.asarray(k_new, dtype=float).ravel()
    sigma = sigma_hat.sigma_hat
    if k_new.size != sigma.shape[0]:
        raise ValueError(
            f"k_new has {k_new.size} entries but Sigma is {sigma.shape[0]} x {sigma.shape[1]}"
        )
    q = float(k_new @ sigma @ k_new)
    if q < 0.0:
        tol = 1e-8 * float(np.trace(sigma)) * max(1.0, float(k_new @ k_new))
        if q < -tol:
            raise NumericError(
                f"negative quadratic form {q:.6g} in the MCSE (tolerance {tol:.6g}); "
                "the covariance estimate is not positive semidefinite"
            )
        q = 0.0
    return math.sqrt(q / sigma_hat.m)
