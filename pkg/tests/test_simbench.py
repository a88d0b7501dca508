import json

import numpy as np
import pytest

from rasper.simbench import (
    ALL_METHODS,
    BenchReport,
    SimSetting,
    _f1,
    _f2,
    generate,
    run_benchmark,
    spearman_rc,
)


class TestSpearmanRC:
    def test_perfect_orders(self):
        a = np.array([0.3, -1.0, 2.0, 0.7])
        assert spearman_rc(a, 10 * a + 3) == pytest.approx(1.0)
        assert spearman_rc(a, -a) == pytest.approx(-1.0)

    def test_monotone_invariance(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal(50)
        b = rng.standard_normal(50)
        assert spearman_rc(np.exp(a), b) == pytest.approx(spearman_rc(a, b))

    def test_hand_value(self):
        # ranks (1,2,3) vs (2,1,3): rho = 1 - 6 * 2 / (3 * 8) = 0.5
        assert spearman_rc(np.array([1.0, 2.0, 3.0]),
                           np.array([2.0, 1.0, 3.0])) == pytest.approx(0.5)

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            spearman_rc(np.ones(5), np.arange(5.0))
        with pytest.raises(ValueError):
            spearman_rc(np.arange(3.0), np.arange(4.0))


class TestLinkFunctions:
    def test_f1_symmetric_about_half(self):
        # f1(u) = sigmoid(u) - sigmoid(u - 1) is symmetric around u = 1/2
        u = np.linspace(-4.0, 5.0, 41)
        assert np.allclose(_f1(u), _f1(1.0 - u), atol=1e-12)

    def test_f1_peak_value(self):
        s = 1.0 / (1.0 + np.exp(-0.5))
        assert _f1(0.5) == pytest.approx(2.0 * s - 1.0)

    def test_f2_quadratic_branch_and_cap(self):
        assert _f2(2.0) == 0.0
        assert _f2(4.0) == pytest.approx(2.0)
        assert _f2(6.999999) == pytest.approx(12.5, rel=1e-5)
        assert _f2(7.0) == 12.5
        assert _f2(100.0) == 12.5


class TestSimSetting:
    def test_validation(self):
        with pytest.raises(ValueError):
            SimSetting(study="3")
        with pytest.raises(ValueError):
            SimSetting(study="1a", beta_external=(1.0,), sigma=0.0)
        with pytest.raises(ValueError):
            SimSetting(study="1a", beta_external=(1.0,), methods=("lasso",))
        with pytest.raises(ValueError):
            SimSetting(study="1b", beta_external=(1.0,) * 5,
                       beta_internal=(1.0,) * 7, n_internal=8)

    def test_from_json_round_trip(self, tmp_path):
        setting = SimSetting(study="1b", beta_external=(1.0, 0.5),
                             beta_internal=(1.0, 0.5, 0.2, 0.1),
                             n_internal=20, replications=3,
                             methods=("ridge",))
        path = tmp_path / "setting.json"
        path.write_text(json.dumps(setting.to_dict()), encoding="utf-8")
        assert SimSetting.from_json(str(path)) == setting


class TestGenerators:
    def setting_1b(self, **kw):
        base = dict(study="1b", beta_external=(1.0, 0.8, 0.6, 0.4, 0.2),
                    beta_internal=(1.0, 0.8, 0.6, 0.4, 0.2, 0.5, 0.5),
                    n_internal=30, n_test=40)
        base.update(kw)
        return SimSetting(**base)

    def test_deterministic(self):
        s = self.setting_1b()
        a = generate(s, np.random.default_rng([3, 7]))
        b = generate(s, np.random.default_rng([3, 7]))
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.y, b.y)
        assert np.array_equal(a.scores_test, b.scores_test)

    def test_study1a_shapes_and_scores(self):
        s = SimSetting(study="1a", beta_external=(1.0, 0.5, 0.2),
                       beta_internal=(0.9, 0.4, 0.3),
                       n_internal=25, n_test=30)
        data = generate(s, np.random.default_rng(0))
        assert data.x.shape == (25, 3) and data.q == 3
        assert np.allclose(data.scores, data.x @ np.array(s.beta_external))
        assert np.allclose(data.mu_internal, data.x @ np.array(s.beta_internal))

    def test_study1b_structure(self):
        s = self.setting_1b()
        data = generate(s, np.random.default_rng(1))
        assert data.x.shape == (30, 7) and data.q == 5
        # score depends only on the conventional block
        assert np.allclose(data.scores, data.x[:, :5] @ np.array(s.beta_external))

    def test_study2_z5_modes_differ_only_in_scores(self):
        kw = dict(study="2", beta_internal=(1.0,) * 6,
                  theta=(0.1, 0.1, 0.2, 0.3), n_internal=20, n_test=25)
        extra = generate(SimSetting(study2_z5_mode="extra", **kw),
                         np.random.default_rng(5))
        reuse = generate(SimSetting(study2_z5_mode="reuse_z4", **kw),
                         np.random.default_rng(5))
        assert np.array_equal(extra.x, reuse.x)
        assert np.array_equal(extra.y, reuse.y)
        assert not np.allclose(extra.scores, reuse.scores)

    def test_study2_theta_zero_score_constant_in_z2(self):
        kw = dict(study="2", beta_internal=(1.0,) * 6,
                  theta=(0.0, 0.0, 0.0, 0.0), n_internal=20, n_test=25)
        data = generate(SimSetting(**kw), np.random.default_rng(6))
        # with all theta zero the exponent collapses and mu_e = 1 + f1(z1)
        assert np.all(data.scores > 0)
        assert np.all(np.abs(data.scores - 1.0) < 1.0)


class TestBenchmark:
    def small_setting(self, **kw):
        base = dict(study="1a", beta_external=(1.0, 0.5),
                    beta_internal=(0.8, 0.6), n_internal=15, n_test=50,
                    replications=3, sigma=0.5, methods=("ridge",),
                    grid_j=1, grid_k=1)
        base.update(kw)
        return SimSetting(**base)

    def test_ols_relative_mse_is_one(self):
        rep = run_benchmark(self.small_setting())
        assert rep.rel_mse_mean["ols"] == pytest.approx(1.0)
        assert rep.rel_mse_se["ols"] == pytest.approx(0.0)

    def test_thread_count_does_not_change_results(self):
        s = self.small_setting(methods=("ridge", "rasper_spearman"),
                               replications=2)
        one = run_benchmark(s, threads=1)
        two = run_benchmark(s, threads=2)
        assert one.rel_mse_mean == two.rel_mse_mean
        assert one.mse_mean == two.mse_mean
        assert one.rc_mean == two.rc_mean

    def test_report_serialization(self):
        rep = run_benchmark(self.small_setting())
        payload = json.loads(rep.to_json())
        assert payload["replications_used"] == 3
        assert payload["failures"] == 0
        methods = [row["method"] for row in payload["results"]]
        assert methods == list(rep.methods)
        assert set(rep.methods) == {"ols", "ridge"}

    def test_method_order_follows_canonical_list(self):
        s = self.small_setting(methods=("stacking", "ridge"))
        rep = run_benchmark(s)
        order = [ALL_METHODS.index(m) for m in rep.methods]
        assert order == sorted(order)
