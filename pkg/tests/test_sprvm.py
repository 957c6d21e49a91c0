import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.linalg import cho_factor, cho_solve

from sprvm import (
    KernelSpec,
    SprvmConfig,
    build_design,
    check_propriety,
    drift_check,
    make_synthetic,
    run_gibbs,
    sample_beta_given_lambda,
    sample_lambda_given_beta,
    standardize_response,
)
from sprvm.errors import ImproperPriorError, NumericError
from sprvm.sprvm import DEFAULT_PRIOR_A, DEFAULT_PRIOR_B, conditional_beta_moments, drift_function


class TestBetaConditional:
    def test_hand_solved_mean(self, rng):
        # K = [1 1], y = 2, xi = 1, lambda = 1: mean solves [[2,1],[1,2]] m = (2,2)
        design = build_design(KernelSpec("gaussian", 1.0), [[0.0]])
        assert_array_equal(design.K, [[1.0, 1.0]])
        mean, _ = conditional_beta_moments(design, [2.0], lam=1.0, xi=1.0)
        assert_allclose(mean, [2.0 / 3.0, 2.0 / 3.0], rtol=1e-14)

    def test_prior_dominates_at_huge_lambda(self, small_problem, rng):
        ds, design = small_problem
        draws = np.array(
            [sample_beta_given_lambda(design, ds.y, 1e12, 1.0, rng) for _ in range(50)]
        )
        assert np.linalg.norm(draws.mean(axis=0)) <= 1e-5

    def test_monte_carlo_matches_closed_form(self, small_problem, rng):
        ds, design = small_problem
        lam, xi = 2.0, 1.5
        mean, cov = conditional_beta_moments(design, ds.y, lam, xi)
        n_draws = 20000
        draws = np.array(
            [sample_beta_given_lambda(design, ds.y, lam, xi, rng) for _ in range(n_draws)]
        )
        se = np.sqrt(np.diag(cov) / n_draws)
        assert (np.abs(draws.mean(axis=0) - mean) <= 4.0 * se).all()

    def test_invalid_parameters(self, small_problem, rng):
        ds, design = small_problem
        with pytest.raises(ValueError):
            sample_beta_given_lambda(design, ds.y, -1.0, 1.0, rng)
        with pytest.raises(ValueError):
            sample_beta_given_lambda(design, ds.y, 1.0, 0.0, rng)


class TestLambdaConditional:
    def test_moments_beta_zero(self, rng):
        # beta = 0 of length 3 (n = 2), a = 1, b = 2: Gamma(2.5, 2), mean 1.25
        draws = np.array(
            [sample_lambda_given_beta(np.zeros(3), 1.0, 2.0, rng) for _ in range(100000)]
        )
        se = math.sqrt(2.5 / 4.0 / draws.size)  # var shape/rate^2
        assert abs(draws.mean() - 1.25) <= 4.0 * se

    def test_moments_shape_three(self, rng):
        # beta'beta = 2, a = 0, b = 0, n = 5: Gamma(3, 1), mean 3
        beta = np.zeros(6)
        beta[0] = math.sqrt(2.0)
        draws = np.array(
            [sample_lambda_given_beta(beta, 0.0, 0.0, rng) for _ in range(100000)]
        )
        se = math.sqrt(3.0 / draws.size)
        assert abs(draws.mean() - 3.0) <= 4.0 * se

    def test_zero_shape_errors(self, rng):
        n = 2
        with pytest.raises(NumericError, match="shape"):
            sample_lambda_given_beta(np.zeros(n + 1), -(n + 1) / 2.0, 1.0, rng)

    def test_zero_rate_errors(self, rng):
        with pytest.raises(NumericError, match="rate"):
            sample_lambda_given_beta(np.zeros(3), 1.0, 0.0, rng)


class TestRunGibbs:
    def test_bit_identical_given_seed(self, small_problem):
        ds, design = small_problem
        config = SprvmConfig(m=300, burn_in=100, seed=77)
        a = run_gibbs(config, design, ds.y)
        b = run_gibbs(config, design, ds.y)
        assert_array_equal(a.beta, b.beta)
        assert_array_equal(a.lam, b.lam)

    def test_default_prior_draws_supported(self):
        ds = standardize_response(make_synthetic(5, 2, 0.3, seed=21))
        design = build_design(KernelSpec("gaussian", 1.0), ds.X)
        config = SprvmConfig(a=-1.0, b=0.0, xi=2.0, m=400, burn_in=200, seed=3)
        draws = run_gibbs(config, design, ds.y)
        assert draws.lam.shape == (400,)
        assert (draws.lam > 0).all() and np.isfinite(draws.lam).all()
        assert np.isfinite(draws.beta).all()

    def test_scan_order_beta_then_lambda(self, small_problem):
        """Replays the pre-generated variate stream by hand for scan 1."""
        ds, design = small_problem
        config = SprvmConfig(a=-1.0, b=0.0, xi=1.0, m=1, burn_in=0, seed=5, init_lambda=2.5)
        draws = run_gibbs(config, design, ds.y)
        np1 = design.n + 1
        shape = 0.5 * np1 + config.a
        rng = np.random.default_rng(config.seed)
        z = rng.standard_normal((1, np1))
        g = rng.standard_gamma(shape, size=1)
        # beta first, from the initial lambda
        prec = config.xi * (design.K.T @ design.K) + config.init_lambda * np.eye(np1)
        c, low = cho_factor(prec, lower=True)
        mean = cho_solve((c, low), config.xi * (design.K.T @ ds.y))
        from scipy.linalg import solve_triangular

        beta = mean + solve_triangular(c, z[0], trans="T", lower=True)
        assert_allclose(draws.beta[0], beta, rtol=1e-12, atol=1e-12)
        # then lambda, from that beta
        lam = g[0] / (0.5 * float(beta @ beta) + config.b)
        assert_allclose(draws.lam[0], lam, rtol=1e-12)

    def test_refuses_proven_improper_prior(self, small_problem):
        ds, design = small_problem
        config = SprvmConfig(a=0.5, b=0.0, m=100, seed=0)
        with pytest.raises(ImproperPriorError):
            run_gibbs(config, design, ds.y)

    def test_warns_when_sufficient_fails_but_runs(self):
        # duplicated covariate rows break condition (iii) only
        X = np.array([[0.0, 1.0], [0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [0.5, 0.25], [1.5, 1.0]])
        y = np.array([0.1, -0.3, 0.2, 0.5, -0.1, 0.9])
        design = build_design(KernelSpec("gaussian", 1.0), X)
        config = SprvmConfig(a=-1.0, b=0.0, m=50, burn_in=10, seed=0)
        with pytest.warns(RuntimeWarning, match="sufficient"):
            draws = run_gibbs(config, design, y)
        assert draws.m == 50


class TestConditionalMoments:
    def test_second_moment_identity(self, small_problem, rng):
        """E[beta'beta | lambda] = ||mean||^2 + tr(cov), estimated by Monte Carlo."""
        ds, design = small_problem
        lam, xi = 1.7, 0.8
        mean, cov = conditional_beta_moments(design, ds.y, lam, xi)
        target = float(mean @ mean) + float(np.trace(cov))
        K = design.K
        np1 = design.n + 1
        a_mat = K.T @ K + (lam / xi) * np.eye(np1)
        direct = float(
            ds.y @ K @ np.linalg.solve(a_mat, np.linalg.solve(a_mat, K.T @ ds.y))
        ) + float(np.trace(np.linalg.inv(xi * (K.T @ K) + lam * np.eye(np1))))
        assert_allclose(target, direct, rtol=1e-9)
        reps = 40000
        vals = np.empty(reps)
        for r in range(reps):
            b = sample_beta_given_lambda(design, ds.y, lam, xi, rng)
            vals[r] = b @ b
        se = vals.std(ddof=1) / math.sqrt(reps)
        assert abs(vals.mean() - target) <= 4.0 * se

    def test_monotone_shrinkage_in_lambda(self, small_problem):
        ds, design = small_problem
        norms = [
            float(np.linalg.norm(conditional_beta_moments(design, ds.y, lam, 1.0)[0]))
            for lam in (0.01, 0.1, 1.0, 10.0, 100.0)
        ]
        assert all(a > b for a, b in zip(norms, norms[1:]))


class TestCheckPropriety:
    def test_default_improper_prior_ok_for_n5(self):
        ds = make_synthetic(5, 2, 0.1, seed=1)
        design = build_design(KernelSpec("gaussian", 1.0), ds.X)
        report = check_propriety(-1.0, 0.0, 5, design)
        assert report.necessary_ok == "holds"
        assert report.condition_i
        assert report.condition_ii_s == 1.0  # a = -1 > -(n-2)/2 = -1.5
        assert report.condition_iii
        assert report.sufficient_ok

    def test_flat_improper_prior_fails(self, small_problem):
        _, design = small_problem
        report = check_propriety(0.0, 0.0, design.n, design)
        assert report.necessary_ok == "fails"
        assert not report.condition_i
        assert not report.sufficient_ok

    def test_boundary_excluded(self, small_problem):
        _, design = small_problem
        n = design.n
        report = check_propriety(-(n + 1) / 2.0, 0.0, n, design)
        assert report.necessary_ok == "fails"

    def test_proper_rate_is_not_applicable(self, small_problem):
        _, design = small_problem
        report = check_propriety(0.001, 0.01, design.n, design)
        assert report.necessary_ok == "not-applicable"
        assert report.condition_i

    def test_condition_ii_pole(self, small_problem):
        _, design = small_problem
        n = design.n
        report = check_propriety(-(n + 1) / 2.0 + 0.005, 0.0, n, design)
        assert report.condition_ii_s is None
        assert not report.sufficient_ok

    def test_condition_ii_bound_holds_when_reevaluated(self, small_problem):
        from scipy.special import gammaln

        _, design = small_problem
        n = design.n
        report = check_propriety(-1.0, 0.0, n, design)
        s = report.condition_ii_s
        shape0 = 0.5 * (n + 1) - 1.0
        assert gammaln(shape0 - s) - gammaln(shape0) < s * math.log(2.0)

    def test_condition_i_always_true_for_positive_rate(self, small_problem):
        from hypothesis import given, settings
        from hypothesis import strategies as st

        _, design = small_problem

        @given(
            st.floats(min_value=-20.0, max_value=20.0, allow_nan=False),
            st.floats(min_value=1e-6, max_value=100.0, allow_nan=False),
        )
        @settings(max_examples=40, deadline=None)
        def check(a, b):
            assert check_propriety(a, b, design.n, design).condition_i

        check()


class TestDriftCheck:
    def test_v_at_one_is_two(self):
        assert drift_function(1.0, 0.3, 0.9) == 2.0
        assert drift_function(1.0, 0.7, 0.2) == 2.0

    def test_contraction_under_sufficient_conditions(self):
        ds = standardize_response(make_synthetic(10, 2, 0.2, seed=42))
        design = build_design(KernelSpec("gaussian", 1.5), ds.X)
        config = SprvmConfig(a=-1.0, b=0.0, xi=1.0, m=10, seed=9)
        grid = np.logspace(-2, 2, 9)
        report = drift_check(config, design, ds.y, grid, m=0.5, s=1.0, reps=400)
        assert report.rho_hat < 1.0
        assert report.linear_fit_ok

    def test_single_point_grid_errors(self, small_problem):
        ds, design = small_problem
        config = SprvmConfig(a=-1.0, b=0.0, m=10, seed=0)
        with pytest.raises(ValueError, match="slope"):
            drift_check(config, design, ds.y, [1.0], m=0.5, s=1.0, reps=10)

    def test_invalid_exponents(self, small_problem):
        ds, design = small_problem
        config = SprvmConfig(a=-1.0, b=0.0, m=10, seed=0)
        with pytest.raises(ValueError):
            drift_check(config, design, ds.y, [0.5, 1.0], m=1.5, s=1.0, reps=10)
        with pytest.raises(ValueError):
            drift_check(config, design, ds.y, [0.5, 1.0], m=0.5, s=1.5, reps=10)
        # b = 0 requires m < -a; here -a = 0.4
        config2 = SprvmConfig(a=-0.4, b=0.0, m=10, seed=0)
        with pytest.raises(ValueError, match="m < -a"):
            drift_check(config2, design, ds.y, [0.5, 1.0], m=0.5, s=1.0, reps=10)


class TestConfigValidation:
    def test_defaults(self):
        config = SprvmConfig(m=1000)
        assert config.a == DEFAULT_PRIOR_A and config.b == DEFAULT_PRIOR_B
        assert config.burn_in == 500

    def test_bad_values(self):
        with pytest.raises(ValueError):
            SprvmConfig(m=0)
        with pytest.raises(ValueError):
            SprvmConfig(m=10, xi=-1.0)
        with pytest.raises(ValueError):
            SprvmConfig(m=10, init_lambda=0.0)
        with pytest.raises(ValueError):
            SprvmConfig(m=10, b=-0.1)
