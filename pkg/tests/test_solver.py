import numpy as np
import pytest
import scipy.linalg

from rasper.concordance import ConcordanceSpec, pair_weights
from rasper.data_model import external_ranks, standardize
from rasper.errors import SingularDesign
from rasper.solver import (
    PenalizedProblem,
    default_nu,
    fit_rasper,
    jj_coefficient,
    local_minimizer,
    mm_step,
    objective_gradient,
    penalized_objective,
    surrogate_value,
)

from conftest import make_problem


class TestJJCoefficient:
    def test_known_value(self):
        assert jj_coefficient(2.0) == pytest.approx(np.tanh(1.0) / 8.0)

    def test_maximum_at_zero(self):
        assert jj_coefficient(0.0) == pytest.approx(0.125)
        u = np.linspace(-5, 5, 201)
        assert np.all(jj_coefficient(u) <= 0.125 + 1e-15)

    def test_even_and_positive(self):
        u = np.linspace(-8, 8, 101)
        vals = jj_coefficient(u)
        assert np.allclose(vals, jj_coefficient(-u))
        assert np.all(vals > 0)

    def test_series_matches_exact_near_zero(self):
        for u in (1e-4, 9.9e-5, 2e-4, 5e-5):
            exact = np.tanh(u / 2.0) / (4.0 * u)
            assert jj_coefficient(u) == pytest.approx(exact, abs=1e-12)


class TestDefaultNu:
    def test_scales_with_ols_norm(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal((30, 3))
        beta = np.array([1.0, -2.0, 0.5])
        y = z @ beta + 0.1 * rng.standard_normal(30)
        d = standardize(z)
        yc = y - y.mean()
        ols = np.linalg.lstsq(d.x - d.x.mean(axis=0), yc, rcond=None)[0]
        assert default_nu(d, y) == pytest.approx(0.1 * np.linalg.norm(ols))

    def test_floor_applied_with_warning(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal((40, 2))
        y = np.zeros(40)  # OLS fit is exactly zero
        d = standardize(z)
        with pytest.warns(UserWarning, match="floor"):
            assert default_nu(d, y) == 1e-3

    def test_singular_design_falls_back_to_ridge(self):
        rng = np.random.default_rng(2)
        col = rng.standard_normal(20)
        z = np.column_stack([col, 2.0 * col + 1.0])
        d = standardize(z)
        y = col + 0.1 * rng.standard_normal(20)
        with pytest.warns(UserWarning, match="singular"):
            nu = default_nu(d, y)
        assert np.isfinite(nu) and nu > 0


class TestObjective:
    def test_matches_manual_computation(self, small_problem):
        from rasper.concordance import concordance_value
        p = small_problem
        rng = np.random.default_rng(0)
        beta = rng.standard_normal(p.design.p)
        beta0 = 0.3
        resid = p.y - beta0 - p.design.x @ beta
        manual = 0.5 * resid @ resid + 0.5 * p.alpha * beta @ beta
        manual -= p.lam * np.log(
            concordance_value(p.design.x, beta, p.nu, p.weights))
        assert penalized_objective(p, beta0, beta) == pytest.approx(manual)

    def test_lam_zero_ignores_weights(self):
        p, _, _ = make_problem(lam=0.0)
        beta = np.zeros(p.design.p)
        resid = p.y - p.y.mean()
        expected = 0.5 * resid @ resid
        assert penalized_objective(p, p.y.mean(), beta) == pytest.approx(expected)


class TestMMStep:
    def test_reduces_to_ridge_at_lam_zero(self):
        p, _, _ = make_problem(lam=0.0, alpha=2.5)
        x = p.design.x
        xc = x - x.mean(axis=0)
        yc = p.y - p.y.mean()
        closed = scipy.linalg.solve(xc.T @ xc + 2.5 * np.eye(p.design.p),
                                    xc.T @ yc, assume_a="pos")
        _, beta = mm_step(p, 0.0, np.zeros(p.design.p))
        assert np.allclose(beta, closed, atol=1e-10)

    def test_intercept_profiled_exactly(self, small_problem):
        b0, beta = mm_step(small_problem, 0.0, np.zeros(small_problem.design.p))
        expected = np.mean(small_problem.y - small_problem.design.x @ beta)
        assert b0 == pytest.approx(expected)

    def test_single_step_descends(self, small_problem):
        p = small_problem
        beta = np.zeros(p.design.p)
        beta0 = p.y.mean()
        before = penalized_objective(p, beta0, beta)
        b0, b = mm_step(p, beta0, beta)
        assert penalized_objective(p, b0, b) <= before + 1e-12


class TestSurrogate:
    @pytest.mark.parametrize("seed", range(4))
    def test_touches_objective_at_anchor(self, seed):
        p, _, _ = make_problem(seed=seed)
        rng = np.random.default_rng(seed + 100)
        anchor = rng.standard_normal(p.design.p)
        beta0 = p.y.mean()
        assert surrogate_value(p, beta0, anchor, anchor) == pytest.approx(
            penalized_objective(p, beta0, anchor), abs=1e-8)

    @pytest.mark.parametrize("seed", range(4))
    def test_upper_bounds_objective(self, seed):
        p, _, _ = make_problem(seed=seed)
        rng = np.random.default_rng(seed + 200)
        anchor = rng.standard_normal(p.design.p)
        beta0 = p.y.mean()
        for _ in range(50):
            beta = 2.0 * rng.standard_normal(p.design.p)
            assert surrogate_value(p, beta0, beta, anchor) >= \
                penalized_objective(p, beta0, beta) - 1e-9


class TestFitRasper:
    @pytest.mark.parametrize("measure", ["spearman", "kendall"])
    @pytest.mark.parametrize("lam", [0.0, 1.0, 10.0, 100.0])
    def test_monotone_trace(self, measure, lam):
        p, _, _ = make_problem(lam=lam, measure=measure)
        fit = fit_rasper(p)
        assert np.all(np.diff(fit.objective_trace) <= 1e-10)

    def test_gradient_vanishes_at_solution(self):
        p, _, _ = make_problem(lam=5.0, alpha=1.0)
        fit = fit_rasper(p, tol=1e-14, max_iter=5000)
        g0, g = objective_gradient(p, fit.beta0, fit.beta)
        assert abs(g0) < 1e-6
        assert np.linalg.norm(g) < 1e-4

    def test_improves_on_unpenalized_start(self, small_problem):
        fit = fit_rasper(small_problem)
        b0, b = local_minimizer(small_problem)
        assert fit.objective_trace[-1] <= \
            penalized_objective(small_problem, b0, b) + 1e-12

    def test_warm_start_used(self, small_problem):
        fit = fit_rasper(small_problem)
        warm = fit_rasper(small_problem, init=fit.beta, beta0_init=fit.beta0)
        assert warm.warm_start == "user"
        assert warm.iterations <= 2
        assert np.allclose(warm.beta, fit.beta, atol=1e-6)

    def test_objective_gradient_matches_finite_differences(self):
        p, _, _ = make_problem(lam=3.0, alpha=0.7)
        rng = np.random.default_rng(0)
        beta = rng.standard_normal(p.design.p)
        beta0 = 0.2
        g0, g = objective_gradient(p, beta0, beta)
        h = 1e-6
        fd0 = (penalized_objective(p, beta0 + h, beta)
               - penalized_objective(p, beta0 - h, beta)) / (2 * h)
        assert g0 == pytest.approx(fd0, rel=1e-5, abs=1e-6)
        for j in range(p.design.p):
            e = np.zeros(p.design.p)
            e[j] = h
            fd = (penalized_objective(p, beta0, beta + e)
                  - penalized_objective(p, beta0, beta - e)) / (2 * h)
            assert g[j] == pytest.approx(fd, rel=1e-5, abs=1e-6)

    def test_kernel_and_numpy_paths_agree(self, small_problem):
        from rasper import _kernels
        if not _kernels.HAVE_NUMBA:
            pytest.skip("numba unavailable")
        fast = fit_rasper(small_problem)
        _kernels.HAVE_NUMBA = False
        try:
            slow = fit_rasper(small_problem)
        finally:
            _kernels.HAVE_NUMBA = True
        assert np.allclose(fast.beta, slow.beta, atol=1e-8)
        assert fast.objective_trace[-1] == pytest.approx(
            slow.objective_trace[-1], abs=1e-8)

    def test_marginalized_problem_fits(self):
        rng = np.random.default_rng(5)
        n, q, extra = 15, 2, 1
        z = rng.standard_normal((n, q))
        b = 0.5 * z[:, :1] + 0.3 * rng.standard_normal((n, extra))
        x = np.hstack([z, b])
        beta_true = np.array([1.0, -0.5, 0.25])
        y = x @ beta_true + 0.2 * rng.standard_normal(n)
        d = standardize(x, q=q)
        ranks = external_ranks(z @ beta_true[:q])
        from rasper.concordance import build_marginal_sampler, marginalized_weights
        spec = ConcordanceSpec("spearman", True, 0.2, samples=3, seed=0)
        w = marginalized_weights(pair_weights(ranks, "spearman"),
                                 build_marginal_sampler(d.z, d.b, 3, 0))
        prob = PenalizedProblem(d, y, w, spec, lam=2.0, alpha=0.5)
        fit = fit_rasper(prob)
        assert fit.converged
        assert np.all(np.diff(fit.objective_trace) <= 1e-10)


class TestLocalMinimizer:
    def test_ols_when_alpha_zero(self):
        p, _, _ = make_problem(lam=0.0, alpha=0.0)
        b0, b = local_minimizer(p)
        x1 = np.hstack([np.ones((p.design.n, 1)), p.design.x])
        coef = np.linalg.lstsq(x1, p.y, rcond=None)[0]
        assert b0 == pytest.approx(coef[0], abs=1e-9)
        assert np.allclose(b, coef[1:], atol=1e-9)

    def test_singular_design_raises(self):
        rng = np.random.default_rng(0)
        col = rng.standard_normal(10)
        z = np.column_stack([col, col * 2.0 + 3.0])
        d = standardize(z)
        y = rng.standard_normal(10)
        ranks = external_ranks(rng.standard_normal(10))
        spec = ConcordanceSpec("spearman", False, 0.1, 1, 0)
        prob = PenalizedProblem(d, y, pair_weights(ranks, "spearman"),
                                spec, lam=0.0, alpha=0.0)
        with pytest.raises(SingularDesign):
            local_minimizer(prob)
