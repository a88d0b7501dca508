import numpy as np
import pytest

from rasper.baselines import (
    fit_atl,
    fit_dtl,
    fit_ols,
    fit_ridge,
    fit_stacking,
    projection_target,
)
from rasper.data_model import external_ranks, standardize
from rasper.errors import SingularDesign


def make_data(seed=0, n=30, p=4):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    y = x @ np.linspace(1.0, 0.3, p) + 2.0 + 0.5 * rng.standard_normal(n)
    return x, y


class TestOLS:
    def test_matches_lstsq(self):
        x, y = make_data()
        beta0, beta = fit_ols(x, y)
        x1 = np.hstack([np.ones((len(y), 1)), x])
        ref, *_ = np.linalg.lstsq(x1, y, rcond=None)
        assert beta0 == pytest.approx(ref[0], abs=1e-10)
        assert np.allclose(beta, ref[1:], atol=1e-10)

    def test_accepts_standardized_design(self):
        x, y = make_data(seed=1)
        design = standardize(x)
        beta0, beta = fit_ols(design, y)
        ref0, ref = fit_ols(design.x, y)
        assert beta0 == pytest.approx(ref0) and np.allclose(beta, ref)

    def test_singular_design(self):
        x, y = make_data(seed=2)
        x = np.hstack([x, x[:, :1]])
        with pytest.raises(SingularDesign):
            fit_ols(x, y)


class TestRidge:
    def test_closed_form_on_centered_data(self):
        x, y = make_data(seed=3)
        alpha = 2.5
        beta0, beta = fit_ridge(x, y, alpha)
        xc = x - x.mean(axis=0)
        yc = y - y.mean()
        ref = np.linalg.solve(xc.T @ xc + alpha * np.eye(x.shape[1]),
                              xc.T @ yc)
        assert np.allclose(beta, ref, atol=1e-10)
        assert beta0 == pytest.approx(y.mean() - x.mean(axis=0) @ ref)

    def test_alpha_zero_is_ols(self):
        x, y = make_data(seed=4)
        assert np.allclose(fit_ridge(x, y, 0.0)[1], fit_ols(x, y)[1])

    def test_negative_alpha_rejected(self):
        x, y = make_data()
        with pytest.raises(ValueError):
            fit_ridge(x, y, -1.0)

    def test_shrinks_norm(self):
        x, y = make_data(seed=5)
        norms = [np.linalg.norm(fit_ridge(x, y, a)[1])
                 for a in (0.0, 1.0, 10.0, 100.0)]
        assert all(a > b for a, b in zip(norms, norms[1:]))


class TestTransfer:
    def test_atl_closed_form(self):
        x, y = make_data(seed=6)
        be = np.array([1.0, -0.5, 0.25, 2.0])
        alpha, lam = 1.5, 3.0
        beta0, beta = fit_atl(x, y, alpha, lam, be)
        xc = x - x.mean(axis=0)
        yc = y - y.mean()
        ref = np.linalg.solve(xc.T @ xc + alpha * np.eye(4),
                              xc.T @ yc + lam * be)
        assert np.allclose(beta, ref, atol=1e-10)
        assert beta0 == pytest.approx(y.mean() - x.mean(axis=0) @ ref)

    def test_dtl_is_atl_with_equal_weights(self):
        x, y = make_data(seed=7)
        be = np.array([0.4, 0.1, -0.2, 0.9])
        d0, d = fit_dtl(x, y, 2.0, be)
        a0, a = fit_atl(x, y, 2.0, 2.0, be)
        assert d0 == a0 and np.array_equal(d, a)

    def test_dtl_limit_recovers_external(self):
        x, y = make_data(seed=8)
        be = np.array([0.4, 0.1, -0.2, 0.9])
        _, beta = fit_dtl(x, y, 1e9, be)
        assert np.allclose(beta, be, atol=1e-5)

    def test_length_mismatch(self):
        x, y = make_data()
        with pytest.raises(ValueError):
            fit_atl(x, y, 1.0, 1.0, np.ones(3))

    def test_negative_penalties_rejected(self):
        x, y = make_data()
        with pytest.raises(ValueError):
            fit_atl(x, y, -1.0, 0.0, np.ones(4))
        with pytest.raises(ValueError):
            fit_atl(x, y, 0.0, -1.0, np.ones(4))


class TestStacking:
    def test_matches_manual_augmented_ols(self):
        x, y = make_data(seed=9)
        rng = np.random.default_rng(10)
        scores = x @ np.ones(4) + rng.standard_normal(len(y))
        ranks = external_ranks(scores)
        beta0, beta, r_mean, r_scale = fit_stacking(x, y, ranks)
        r = ranks.r.astype(float)
        assert r_mean == pytest.approx(r.mean())
        assert r_scale == pytest.approx(
            np.sqrt(((r - r.mean()) ** 2).sum() / (len(y) - 1)))
        aug = np.hstack([x, ((r - r_mean) / r_scale)[:, None]])
        ref0, ref = fit_ols(aug, y)
        assert beta0 == pytest.approx(ref0)
        assert np.allclose(beta, ref)

    def test_constant_ranks_rejected(self):
        x, y = make_data(n=6)
        ranks = external_ranks(np.zeros(6))
        with pytest.raises(SingularDesign):
            fit_stacking(x, y, ranks)


class TestProjection:
    def test_projection_with_padding(self):
        rng = np.random.default_rng(11)
        z = rng.standard_normal((40, 3))
        bz = np.array([1.0, -2.0, 0.5])
        mu = z @ bz
        target = projection_target(z, mu, 5)
        assert target.shape == (5,)
        assert np.allclose(target[:3], bz, atol=1e-10)
        assert np.all(target[3:] == 0.0)

    def test_projection_is_least_squares(self):
        rng = np.random.default_rng(12)
        z = rng.standard_normal((40, 3))
        mu = rng.standard_normal(40)
        target = projection_target(z, mu, 3)
        ref, *_ = np.linalg.lstsq(z, mu, rcond=None)
        assert np.allclose(target, ref, atol=1e-10)

    def test_singular_projection(self):
        z = np.ones((10, 2))
        with pytest.raises(SingularDesign):
            projection_target(z, np.arange(10.0), 2)
