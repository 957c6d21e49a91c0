"""Numpy fallback for the Gibbs scan loops.

Both backends share one contract: the driver pre-generates all standard
normal and standard Gamma(shape, 1) variates, and the scan loop consumes
them in a fixed order.  Chains are therefore reproducible across backends
bit for bit (the linear algebra goes through the same LAPACK routines).

Keep the arithmetic here in lockstep with _chains_cy.pyx.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.linalg.blas import dgemv

from .errors import FactorizationError, NumericError

JITTER_REL = 1e-10
MAX_FACTOR_ATTEMPTS = 4  # no jitter, then base, 10x, 100x


def _draw_coef(p, ktk, trace_ktk, kty, prec_scale, ridge, z, xi_label):
    """One draw from N(P^{-1} (prec_scale Kty), P^{-1}), P = prec_scale KtK + diag(ridge).

    ridge is a scalar (single penalty) or a length-(n+1) vector (one penalty
    per coefficient).  On factorization failure a tiny diagonal jitter is
    added and escalated tenfold up to three times.
    """
    np1 = ktk.shape[0]
    ridge_sum = float(np.sum(ridge)) if np.ndim(ridge) else np1 * ridge
    base_jitter = JITTER_REL * (prec_scale * trace_ktk + ridge_sum) / np1
    jitter = 0.0
    for _ in range(MAX_FACTOR_ATTEMPTS):
        p[...] = ktk
        p *= prec_scale
        p.flat[:: np1 + 1] += ridge + jitter
        try:
            c, low = cho_factor(p, lower=True, overwrite_a=True, check_finite=False)
            break
        except LinAlgError:
            jitter = base_jitter if jitter == 0.0 else jitter * 10.0
    else:
        p[...] = ktk
        p *= prec_scale
        p.flat[:: np1 + 1] += ridge
        cond = float(np.linalg.cond(p))
        ridge_desc = (
            f"min penalty {float(np.min(ridge)):.6g}" if np.ndim(ridge) else f"penalty {ridge:.6g}"
        )
        raise FactorizationError(
            f"precision matrix not positive definite after jitter escalation "
            f"({ridge_desc}, noise precision {xi_label:.6g}, condition estimate {cond:.3e})",
            lam=float(np.min(ridge)) if np.ndim(ridge) else float(ridge),
            xi=xi_label,
            cond=cond,
        )
    mean = cho_solve((c, low), prec_scale * kty, check_finite=False)
    w = solve_triangular(c, z, trans="T", lower=True, check_finite=False)
    return mean + w


def run_sprvm_chain(ktk, kty, trace_ktk, xi, prior_b, init_lambda, burn_in, z, g):
    """Single-penalty chain: per scan draw beta | lambda then lambda | beta.

    z: (total, n+1) standard normals; g: (total,) Gamma(shape, 1) draws with
    shape = (n+1)/2 + a.  Returns (beta (M, n+1), lambda (M,)) where
    M = total - burn_in.
    """
    total, np1 = z.shape
    m = total - burn_in
    beta_out = np.empty((m, np1))
    lam_out = np.empty(m)
    p = np.empty((np1, np1), order="F")
    lam = float(init_lambda)
    for j in range(total):
        beta = _draw_coef(p, ktk, trace_ktk, kty, xi, lam, z[j], xi)
        rate = 0.5 * float(beta @ beta) + prior_b
        if rate <= 0.0:
            raise NumericError(
                f"non-positive Gamma rate {rate:.6g} for the penalty draw at scan {j}"
            )
        lam = g[j] / rate
        if j >= burn_in:
            beta_out[j - burn_in] = beta
            lam_out[j - burn_in] = lam
    return beta_out, lam_out


def run_rvm_chain(
    ktk,
    kty,
    kmat,
    y,
    trace_ktk,
    prior_b,
    prior_d,
    init_lambda,
    init_inv_sigma2,
    burn_in,
    z,
    g_sig,
    g_lam,
):
    """Multi-penalty chain: per scan draw 1/sigma^2 then every lambda_i, then beta.

    The initial beta is one draw from its conditional at the supplied
    (init_lambda, init_inv_sigma2), consuming z[0]; scan j then uses
    g_sig[j], g_lam[j], z[j + 1].  Returns (beta, lambdas, inv_sigma2) with
    M = len(g_sig) - burn_in retained scans.
    """
    total = g_sig.shape[0]
    np1 = z.shape[1]
    m = total - burn_in
    beta_out = np.empty((m, np1))
    lam_out = np.empty((m, np1))
    inv_sigma2_out = np.empty(m)
    p = np.empty((np1, np1), order="F")
    lam = np.broadcast_to(np.asarray(init_lambda, dtype=float), np1).copy()
    inv_s2 = float(init_inv_sigma2)
    beta = _draw_coef(p, ktk, trace_ktk, kty, inv_s2, lam, z[0], inv_s2)
    for j in range(total):
        # scipy's dgemv keeps the matvec on the same BLAS path as the
        # compiled backend (kmat is Fortran-ordered)
        r = y - dgemv(1.0, kmat, beta)
        rate_sig = 0.5 * float(r @ r) + prior_d
        if rate_sig <= 0.0:
            raise NumericError(
                f"non-positive Gamma rate {rate_sig:.6g} for the noise precision "
                f"draw at scan {j} (response interpolated exactly with d = 0)"
            )
        inv_s2 = g_sig[j] / rate_sig
        rates_lam = 0.5 * beta**2 + prior_b
        if not (rates_lam > 0.0).all():
            raise NumericError(
                f"non-positive Gamma rate for a penalty draw at scan {j}"
            )
        lam = g_lam[j] / rates_lam
        beta = _draw_coef(p, ktk, trace_ktk, kty, inv_s2, lam, z[j + 1], inv_s2)
        if j >= burn_in:
            beta_out[j - burn_in] = beta
            lam_out[j - burn_in] = lam
            inv_sigma2_out[j - burn_in] = inv_s2
    return beta_out, lam_out, inv_sigma2_out
