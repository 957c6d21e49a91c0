# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Gibbs scan loops.

Mirrors _chains_py.py operation for operation: identical variate consumption
order and the same LAPACK/BLAS routines (dpotrf/dpotrs/dtrtrs/dgemv/ddot),
so chains match the fallback backend bit for bit.
"""

import numpy as np

from scipy.linalg.cython_blas cimport ddot, dgemv
from scipy.linalg.cython_lapack cimport dpotrf, dpotrs, dtrtrs

from .errors import FactorizationError, NumericError

cdef double JITTER_REL = 1e-10
cdef int MAX_FACTOR_ATTEMPTS = 4


cdef int _draw_coef_impl(
    double[::1, :] p,
    const double[::1, :] ktk,
    double trace_ktk,
    const double[::1] kty,
    double prec_scale,
    double ridge_scalar,
    const double[::1] ridge_vec,
    bint ridge_is_vec,
    double[::1] z_work,
    double[::1] rhs,
    double[::1] beta,
    int np1,
) noexcept nogil:
    """Draws beta from N(P^{-1}(prec_scale Kty), P^{-1}); returns 0 on success."""
    cdef double rsum, base_jitter, jitter, radd
    cdef int attempt, i, j, info, one = 1
    if ridge_is_vec:
        rsum = 0.0
        for i in range(np1):
            rsum += ridge_vec[i]
    else:
        rsum = np1 * ridge_scalar
    base_jitter = JITTER_REL * (prec_scale * trace_ktk + rsum) / np1
    jitter = 0.0
    for attempt in range(MAX_FACTOR_ATTEMPTS):
        for j in range(np1):
            for i in range(np1):
                p[i, j] = prec_scale * ktk[i, j]
            if ridge_is_vec:
                radd = ridge_vec[j] + jitter
            else:
                radd = ridge_scalar + jitter
            p[j, j] = p[j, j] + radd
        info = 0
        dpotrf(b"L", &np1, &p[0, 0], &np1, &info)
        if info == 0:
            for i in range(np1):
                rhs[i] = prec_scale * kty[i]
            dpotrs(b"L", &np1, &one, &p[0, 0], &np1, &rhs[0], &np1, &info)
            dtrtrs(b"L", b"T", b"N", &np1, &one, &p[0, 0], &np1, &z_work[0], &np1, &info)
            for i in range(np1):
                beta[i] = rhs[i] + z_work[i]
            return 0
        jitter = base_jitter if jitter == 0.0 else jitter * 10.0
    return -1


def _factorization_error(ktk, prec_scale, ridge, xi_label):
    np1 = ktk.shape[0]
    p = prec_scale * np.asarray(ktk)
    p[np.diag_indices(np1)] += ridge
    cond = float(np.linalg.cond(p))
    ridge_desc = (
        f"min penalty {float(np.min(ridge)):.6g}"
        if np.ndim(ridge)
        else f"penalty {ridge:.6g}"
    )
    return FactorizationError(
        f"precision matrix not positive definite after jitter escalation "
        f"({ridge_desc}, noise precision {xi_label:.6g}, condition estimate {cond:.3e})",
        lam=float(np.min(ridge)) if np.ndim(ridge) else float(ridge),
        xi=xi_label,
        cond=cond,
    )


def run_sprvm_chain(ktk, kty, trace_ktk, xi, prior_b, init_lambda, burn_in, z, g):
    """Single-penalty chain; see _chains_py.run_sprvm_chain for the contract."""
    cdef const double[::1, :] ktk_v = np.asfortranarray(ktk, dtype=np.float64)
    cdef const double[::1] kty_v = np.ascontiguousarray(kty, dtype=np.float64)
    cdef const double[:, ::1] z_v = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] g_v = np.ascontiguousarray(g, dtype=np.float64)
    cdef int total = z_v.shape[0]
    cdef int np1 = z_v.shape[1]
    cdef int burn = burn_in
    cdef int m = total - burn
    beta_out_arr = np.empty((m, np1))
    lam_out_arr = np.empty(m)
    cdef double[:, ::1] beta_out = beta_out_arr
    cdef double[::1] lam_out = lam_out_arr
    cdef double[::1, :] p = np.empty((np1, np1), order="F")
    cdef double[::1] z_work = np.empty(np1)
    cdef double[::1] rhs = np.empty(np1)
    cdef double[::1] beta = np.empty(np1)
    cdef double[::1] ridge_unused = np.empty(1)
    cdef double tr = trace_ktk
    cdef double xi_c = xi
    cdef double b_c = prior_b
    cdef double lam = init_lambda
    cdef double bb, rate
    cdef int j, i, one = 1, err = 0, err_scan = 0
    cdef double err_lam = 0.0, err_rate = 0.0
    with nogil:
        for j in range(total):
            for i in range(np1):
                z_work[i] = z_v[j, i]
            if _draw_coef_impl(
                p, ktk_v, tr, kty_v, xi_c, lam, ridge_unused, 0, z_work, rhs, beta, np1
            ) != 0:
                err = 1
                err_scan = j
                err_lam = lam
                break
            bb = ddot(&np1, &beta[0], &one, &beta[0], &one)
            rate = 0.5 * bb + b_c
            if rate <= 0.0:
                err = 2
                err_scan = j
                err_rate = rate
                break
            lam = g_v[j] / rate
            if j >= burn:
                for i in range(np1):
                    beta_out[j - burn, i] = beta[i]
                lam_out[j - burn] = lam
    if err == 1:
        raise _factorization_error(np.asarray(ktk_v), xi, err_lam, xi)
    if err == 2:
        raise NumericError(
            f"non-positive Gamma rate {err_rate:.6g} for the penalty draw at scan {err_scan}"
        )
    return beta_out_arr, lam_out_arr


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
    """Multi-penalty chain; see _chains_py.run_rvm_chain for the contract."""
    cdef const double[::1, :] ktk_v = np.asfortranarray(ktk, dtype=np.float64)
    cdef const double[::1] kty_v = np.ascontiguousarray(kty, dtype=np.float64)
    cdef const double[::1, :] kmat_v = np.asfortranarray(kmat, dtype=np.float64)
    cdef const double[::1] y_v = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:, ::1] z_v = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] g_sig_v = np.ascontiguousarray(g_sig, dtype=np.float64)
    cdef const double[:, ::1] g_lam_v = np.ascontiguousarray(g_lam, dtype=np.float64)
    cdef int total = g_sig_v.shape[0]
    cdef int np1 = z_v.shape[1]
    cdef int n = kmat_v.shape[0]
    cdef int burn = burn_in
    cdef int m = total - burn
    beta_out_arr = np.empty((m, np1))
    lam_out_arr = np.empty((m, np1))
    inv_sigma2_arr = np.empty(m)
    cdef double[:, ::1] beta_out = beta_out_arr
    cdef double[:, ::1] lam_out = lam_out_arr
    cdef double[::1] inv_sigma2_out = inv_sigma2_arr
    cdef double[::1, :] p = np.empty((np1, np1), order="F")
    cdef double[::1] z_work = np.empty(np1)
    cdef double[::1] rhs = np.empty(np1)
    cdef double[::1] beta = np.empty(np1)
    cdef double[::1] lam = np.ascontiguousarray(
        np.broadcast_to(np.asarray(init_lambda, dtype=np.float64), np1).copy()
    )
    cdef double[::1] wbuf = np.empty(n)
    cdef double[::1] rbuf = np.empty(n)
    cdef double tr = trace_ktk
    cdef double b_c = prior_b
    cdef double d_c = prior_d
    cdef double inv_s2 = init_inv_sigma2
    cdef double rss, rate_sig, rate_i
    cdef double one_d = 1.0, zero_d = 0.0
    cdef int j, i, one = 1, err = 0, err_scan = 0
    cdef double err_scale = 0.0, err_rate = 0.0
    cdef double err_ridge_min = 0.0
    with nogil:
        for i in range(np1):
            z_work[i] = z_v[0, i]
        if _draw_coef_impl(
            p, ktk_v, tr, kty_v, inv_s2, 0.0, lam, 1, z_work, rhs, beta, np1
        ) != 0:
            err = 1
            err_scale = inv_s2
        if err == 0:
            for j in range(total):
                dgemv(b"N", &n, &np1, &one_d, <double*>&kmat_v[0, 0], &n, &beta[0], &one,
                      &zero_d, &wbuf[0], &one)
                for i in range(n):
                    rbuf[i] = y_v[i] - wbuf[i]
                rss = ddot(&n, &rbuf[0], &one, &rbuf[0], &one)
                rate_sig = 0.5 * rss + d_c
                if rate_sig <= 0.0:
                    err = 2
                    err_scan = j
                    err_rate = rate_sig
                    break
                inv_s2 = g_sig_v[j] / rate_sig
                for i in range(np1):
                    rate_i = 0.5 * (beta[i] * beta[i]) + b_c
                    if rate_i <= 0.0:
                        err = 3
                        err_scan = j
                        break
                    lam[i] = g_lam_v[j, i] / rate_i
                if err != 0:
                    break
                for i in range(np1):
                    z_work[i] = z_v[j + 1, i]
                if _draw_coef_impl(
                    p, ktk_v, tr, kty_v, inv_s2, 0.0, lam, 1, z_work, rhs, beta, np1
                ) != 0:
                    err = 1
                    err_scale = inv_s2
                    break
                if j >= burn:
                    for i in range(np1):
                        beta_out[j - burn, i] = beta[i]
                        lam_out[j - burn, i] = lam[i]
                    inv_sigma2_out[j - burn] = inv_s2
    if err == 1:
        raise _factorization_error(np.asarray(ktk_v), err_scale, np.asarray(lam), err_scale)
    if err == 2:
        raise NumericError(
            f"non-positive Gamma rate {err_rate:.6g} for the noise precision "
            f"draw at scan {err_scan} (response interpolated exactly with d = 0)"
        )
    if err == 3:
        raise NumericError(
            f"non-positive Gamma rate for a penalty draw at scan {err_scan}"
        )
    return beta_out_arr, lam_out_arr, inv_sigma2_arr
