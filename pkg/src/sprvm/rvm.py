"""Baseline multi-penalty relevance vector machine and its Gibbs sampler.

One Gamma(a, b) precision per coefficient plus a Gamma(n/2 + c, .) noise
precision.  Defaults follow the standard data-analysis choice: improper
pi(1/sigma^2) ~ sigma^2 via c = d = 0 and a proper Gamma(0.001, 0.01) on
each penalty (mean 0.1, variance 10), since improper penalty priors are
not covered by any known propriety result for this model.

Scan order within each iteration: given the current beta, draw 1/sigma^2,
then every lambda_i, then beta.  No Monte Carlo standard error is reported
for predictions from this sampler: its convergence rate is unknown, so no
Markov chain CLT is available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend, kernels
from ._chains_py import _draw_coef
from .errors import NumericError


@dataclass(frozen=True)
class RvmConfig:
    """Sampler configuration with the standard defaults a=0.001, b=0.01, c=d=0.

    init_lambda may be a scalar (broadcast over all n+1 penalties) or a
    full vector; burn_in defaults to m // 2.
    """

    a: float = 0.001
    b: float = 0.01
    c: float = 0.0
    d: float = 0.0
    m: int = 5000
    burn_in: int | None = None
    seed: int = 0
    init_lambda: float | np.ndarray = 1.0
    init_inv_sigma2: float = 1.0

    def __post_init__(self):
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.m // 2)
        if self.m < 1:
            raise ValueError(f"m must be >= 1; got {self.m}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0; got {self.burn_in}")
        init_lam = np.asarray(self.init_lambda, dtype=float)
        if (init_lam <= 0).any() or not np.isfinite(init_lam).all():
            raise ValueError("init_lambda values must be finite and positive")
        if not (self.init_inv_sigma2 > 0 and math.isfinite(self.init_inv_sigma2)):
            raise ValueError(
                f"init_inv_sigma2 must be positive; got {self.init_inv_sigma2}"
            )
        for name in ("a", "b", "c", "d"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"hyperparameter {name} must be finite")
        if self.a + 0.5 <= 0:
            raise ValueError(f"a + 1/2 must be > 0 to sample penalties; got a = {self.a}")
        if self.b < 0 or self.d < 0:
            raise ValueError("rate hyperparameters b and d must be >= 0")


@dataclass(frozen=True)
class RvmDraws:
    """Retained draws: beta and lambdas are (m, n+1), inv_sigma2 is (m,)."""

    beta: np.ndarray
    lambdas: np.ndarray
    inv_sigma2: np.ndarray
    config: RvmConfig
    design: kernels.DesignMatrix = field(repr=False)

    def __post_init__(self):
        if not (
            self.beta.shape[0] == self.lambdas.shape[0] == self.inv_sigma2.shape[0]
        ):
            raise ValueError("draw counts differ across parameter blocks")

    @property
    def m(self) -> int:
        return self.beta.shape[0]


def _design_array(design) -> np.ndarray:
    return np.asarray(getattr(design, "K", design), dtype=float)


def rvm_sample_beta(design, y, d_diag, inv_sigma2, rng) -> np.ndarray:
    """One draw of beta | (D, sigma^2): N((K'K + D sigma^2)^{-1} K'y, (K'K/sigma^2 + D)^{-1})."""
    K = _design_array(design)
    y = np.asarray(y, dtype=float).ravel()
    d_diag = np.asarray(d_diag, dtype=float).ravel()
    np1 = K.shape[1]
    if d_diag.size != np1:
        raise ValueError(f"D has {d_diag.size} entries, expected {np1}")
    if (d_diag <= 0).any() or inv_sigma2 <= 0:
        raise ValueError("penalties and noise precision must be positive")
    ktk = np.asfortranarray(K.T @ K)
    kty = K.T @ y
    p = np.empty((np1, np1), order="F")
    z = rng.standard_normal(np1)
    return _draw_coef(
        p, ktk, float(np.trace(ktk)), kty, float(inv_sigma2), d_diag, z, float(inv_sigma2)
    )


def rvm_sample_inv_sigma2(design, y, beta, c, d, rng) -> float:
    """One Gamma(n/2 + c, ||y - K beta||^2 / 2 + d) draw of the noise precision."""
    K = _design_array(design)
    y = np.asarray(y, dtype=float).ravel()
    beta = np.asarray(beta, dtype=float).ravel()
    n = K.shape[0]
    shape = 0.5 * n + c
    r = y - K @ beta
    rate = 0.5 * float(r @ r) + d
    if shape <= 0:
        raise NumericError(f"non-positive Gamma shape {shape:.6g}: n/2 + c must be > 0")
    if rate <= 0:
        raise NumericError(
            f"non-positive Gamma rate {rate:.6g} "
            "(response interpolated exactly with d = 0)"
        )
    return float(rng.standard_gamma(shape) / rate)


def rvm_sample_lambda_i(beta_i: float, a: float, b: float, rng) -> float:
    """One Gamma(a + 1/2, beta_i^2 / 2 + b) draw for a single penalty."""
    shape = a + 0.5
    rate = 0.5 * beta_i**2 + b
    if shape <= 0:
        raise NumericError(f"non-positive Gamma shape {shape:.6g}: a + 1/2 must be > 0")
    if rate <= 0:
        raise NumericError(f"non-positive Gamma rate {rate:.6g}")
    return float(rng.standard_gamma(shape) / rate)


def run_gibbs(config: RvmConfig, design: kernels.DesignMatrix, y) -> RvmDraws:
    """Runs the sampler and returns the retained draws.

    The chain state is beta; it is initialized with one draw from its
    conditional at (init_lambda, init_inv_sigma2), after which every scan
    updates the (1/sigma^2, {lambda_i}) block before beta.  Deterministic
    given config.seed.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = design.n
    np1 = n + 1
    if y.size != n:
        raise ValueError(f"y has {y.size} entries but the design has {n} rows")
    sig_shape = 0.5 * n + config.c
    lam_shape = config.a + 0.5
    if sig_shape <= 0:
        raise NumericError(
            f"Gamma shape n/2 + c = {sig_shape:.6g} must be positive"
        )
    total = config.burn_in + config.m
    rng = np.random.default_rng(config.seed)
    z = rng.standard_normal((total + 1, np1))
    g_sig = rng.standard_gamma(sig_shape, size=total)
    g_lam = rng.standard_gamma(lam_shape, size=(total, np1))
    K = design.K
    ktk = np.asfortranarray(K.T @ K)
    kty = K.T @ y
    kmat = np.asfortranarray(K)
    init_lambda = np.broadcast_to(
        np.asarray(config.init_lambda, dtype=float), np1
    ).copy()
    beta, lambdas, inv_sigma2 = _backend.run_rvm_chain(
        ktk,
        kty,
        kmat,
        y,
        float(np.trace(ktk)),
        config.b,
        config.d,
        init_lambda,
        config.init_inv_sigma2,
        config.burn_in,
        z,
        g_sig,
        g_lam,
    )
    if not np.isfinite(beta).all():
        raise NumericError("sampler produced non-finite coefficient draws")
    return RvmDraws(
        beta=beta, lambdas=lambdas, inv_sigma2=inv_sigma2, config=config, design=design
    )
