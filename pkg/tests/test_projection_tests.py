import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdproj.dataset import Dataset, Direction, FoldPlan, make_folds
from hdproj.projection_tests import (Z_975, DegenerateVarianceError, TestOptions, fixed_provider, p_value,
                                     pc_provider, population_provider, t_anchored, t_onestep, t_plugin)
from hdproj.simulation import gen_appendix_a, gen_zero_inflated
from hdproj.sparse_logistic import AnchorConfig

from oracles import plugin_statistic_bruteforce


def _golden():
    # first coordinate carries the signal; second is noise the direction ignores
    x = np.array([[2.0, 5.0], [0.0, -1.0], [3.0, 0.0], [1.0, 2.0]])
    z = np.array([[1.0, 0.0], [-1.0, 3.0], [2.0, 1.0], [0.0, 0.0]])
    plan = FoldPlan(2, np.array([0, 0, 1, 1]), np.array([0, 0, 1, 1]), seed=0)
    return Dataset(x, z), plan


class TestPlugin:
    def test_golden_toy(self):
        # fold 0: X {2, 0}, Z {1, -1}: theta 1, variance 1/2 + 1/2
        # fold 1: X {3, 1}, Z {2, 0}: theta 1, variance 1/2 + 1/2
        d, plan = _golden()
        r = t_plugin(d, plan, fixed_provider(Direction([1.0, 0.0])))
        assert r.statistic == pytest.approx(math.sqrt(2), abs=1e-15)
        assert r.std_error == pytest.approx(math.sqrt(2), abs=1e-15)
        assert r.theta_hat == pytest.approx(2.0, abs=1e-15)
        assert [f["theta"] for f in r.per_fold] == [1.0, 1.0]
        assert r.p_value == pytest.approx(float(mpmath.erfc(1)), abs=1e-15)
        assert r.ci_95 is None

    def test_degenerate_variance(self):
        x = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]])
        z = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0], [0.0, 5.0]])
        plan = FoldPlan(2, np.array([0, 0, 1, 1]), np.array([0, 0, 1, 1]), seed=0)
        with pytest.raises(DegenerateVarianceError):
            t_plugin(Dataset(x, z), plan, fixed_provider(Direction([1.0, 0.0])))

    def test_bruteforce_12_samples(self):
        rng = np.random.default_rng(2024)
        d = Dataset(rng.standard_normal((6, 3)) + [0.5, 0, 0], rng.standard_normal((6, 3)))
        plan = make_folds(6, 6, 2, seed=7)
        r = t_plugin(d, plan, pc_provider(dense=True))
        u = [dir_.weights for dir_ in r.directions]
        assert u[1] @ u[0] >= 0
        ref = plugin_statistic_bruteforce(d.x, d.z, plan.x_assignment, plan.z_assignment, u)
        assert abs(r.statistic - ref) <= 1e-12

    def test_plan_mismatch(self):
        d, _ = _golden()
        with pytest.raises(ValueError):
            t_plugin(d, make_folds(5, 4, 2, 0), fixed_provider(Direction([1.0, 0.0])))

    def test_json_fields(self):
        d, plan = _golden()
        r = t_plugin(d, plan, fixed_provider(Direction([1.0, 0.0])))
        out = r.to_dict()
        assert list(out) == ["statistic", "std_error", "p_value", "theta_hat", "ci_95", "per_fold",
                             "mean_direction"]
        assert out["per_fold"][0] == {"fold": 0, "theta": 1.0, "nonzeros": 1}
        assert '"mean_direction": [1.0, 0.0]' in r.to_json()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100.0))
def test_scale_invariance_and_sign(seed, c):
    rng = np.random.default_rng(seed)
    d = Dataset(rng.standard_normal((9, 4)) + 0.3, rng.standard_normal((8, 4)))
    plan = make_folds(9, 8, 3, seed)
    u = rng.standard_normal(4)
    base = t_plugin(d, plan, fixed_provider(Direction(u)))
    scaled = t_plugin(d, plan, fixed_provider(Direction(c * u)))
    flipped = t_plugin(d, plan, fixed_provider(Direction(-u)))
    assert abs(scaled.statistic - base.statistic) <= 1e-10 * max(1.0, abs(base.statistic))
    assert abs(flipped.statistic + base.statistic) <= 1e-12 * max(1.0, abs(base.statistic))
    assert flipped.p_value == pytest.approx(base.p_value, abs=1e-15)


class TestPValue:
    def test_zero(self):
        assert p_value(0.0) == 1.0

    def test_quantile(self):
        assert p_value(1.959964) == pytest.approx(0.05, abs=1e-5)
        assert p_value(Z_975) == pytest.approx(0.05, abs=1e-14)

    @pytest.mark.parametrize("t", [0.1, 1.0, 1.959964, 3.0, 6.5, 9.0])
    def test_against_high_precision(self, t):
        ref = float(mpmath.erfc(mpmath.mpf(t) / mpmath.sqrt(2)))
        assert p_value(t) == pytest.approx(ref, abs=1e-12, rel=1e-12)
        assert p_value(-t) == p_value(t)

    def test_non_finite(self):
        for t in (math.inf, math.nan):
            with pytest.raises(ValueError):
                p_value(t)


class TestOnestep:
    def test_zero_s_equals_plugin(self):
        d, pop = gen_appendix_a("global_null", 5, 60, 40)
        plan = make_folds(d.n_x, d.n_z, 2, 5)
        one = t_onestep(d, plan, oracle=pop)
        plug = t_plugin(d, plan, population_provider(pop))
        assert one.statistic == pytest.approx(plug.statistic, abs=1e-12)
        assert all(f["correction"] == 0.0 for f in one.per_fold)

    def test_ci_is_theta_pm_quantile(self):
        d, pop = gen_appendix_a("projected_null", 6, 80, 40)
        r = t_onestep(d, make_folds(d.n_x, d.n_z, 2, 6), oracle=pop)
        lo, hi = r.ci_95
        assert lo == pytest.approx(r.theta_hat - Z_975 * r.std_error, abs=1e-14)
        assert hi == pytest.approx(r.theta_hat + Z_975 * r.std_error, abs=1e-14)

    def test_estimated_nuisances_run(self):
        d, _ = gen_appendix_a("projected_null", 7)
        r = t_onestep(d, make_folds(d.n_x, d.n_z, 2, 7))
        assert 0 <= r.p_value <= 1 and r.std_error > 0
        assert len(r.per_fold) == 2 and all(f["nonzeros"] <= 10 for f in r.per_fold)

    def test_folds_aligned(self):
        d, _ = gen_appendix_a("projected_null", 8)
        r = t_onestep(d, make_folds(d.n_x, d.n_z, 3, 8), options=TestOptions(dense_pc=True))
        ref = r.directions[0].weights
        assert all(dir_.weights @ ref >= 0 for dir_ in r.directions)


class TestAnchored:
    def test_zero_beta_equals_plugin(self):
        d, _ = gen_appendix_a("projected_null", 9)
        plan = make_folds(d.n_x, d.n_z, 2, 9)
        anc = t_anchored(d, plan, classifier=lambda x, z: np.zeros(x.shape[1]))
        plug = t_plugin(d, plan)
        assert anc.statistic == plug.statistic
        assert all(not f["beta_used"] for f in anc.per_fold)

    def test_beta_added_with_weight(self):
        d, pop = gen_appendix_a("projected_null", 10)
        plan = make_folds(d.n_x, d.n_z, 2, 10)
        beta = np.zeros(100)
        beta[0] = 1.0
        anc = t_anchored(d, plan, AnchorConfig(), oracle=pop, classifier=lambda x, z: beta)
        n = min(plan.x_fold(0).size, plan.z_fold(0).size)
        np.testing.assert_allclose(anc.directions[0].weights, pop.v1 + math.sqrt(n) * beta)

    def test_lasso_default_detects_projected_signal(self):
        d, _ = gen_zero_inflated("projected_null", 300, 11)
        r = t_anchored(d, make_folds(d.n_x, d.n_z, 2, 11))
        assert all(f["beta_used"] for f in r.per_fold)
        assert r.p_value < 1e-6

    def test_user_direction_provider(self):
        d, pop = gen_appendix_a("global_null", 12, 80, 40)
        plan = make_folds(d.n_x, d.n_z, 2, 12)
        r = t_anchored(d, plan, direction_provider=population_provider(pop),
                       classifier=lambda x, z: np.zeros(100))
        np.testing.assert_array_equal(r.mean_direction, pop.v1)
