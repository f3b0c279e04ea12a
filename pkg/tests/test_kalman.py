import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_gaussian_model
from oracles import dense_posterior
from ssmsmooth.errors import UnsupportedModelError
from ssmsmooth.kalman import kalman_filter, kalman_update, log_likelihood, smooth
from ssmsmooth.model import InitialState, NoiseSpec, StateSpaceModel, build_trend_model


def _local_level(q, r=1.0):
    if q == 0:
        return build_trend_model(1, 0.0, r)
    return build_trend_model(1, q, r)


def _oracle(model, init, ys):
    return dense_posterior(model.F, model.G, model.H, model.system_cov(), model.obs_var(), init.mean, init.cov, ys)


class TestKalmanFilter:
    def test_one_step_by_hand(self):
        model = _local_level(1.0)
        tr = kalman_filter(model, InitialState([0.0], [[1.0]]), [1.0])
        assert tr.predicted.mean[0, 0] == 0.0
        assert tr.predicted.cov[0, 0, 0] == pytest.approx(2.0)
        assert tr.filtered.mean[0, 0] == pytest.approx(2 / 3)
        assert tr.filtered.cov[0, 0, 0] == pytest.approx(2 / 3)

    def test_static_level_is_running_mean(self):
        ys = np.array([1.0, 4.0, -2.0, 0.5, 3.0])
        tr = kalman_filter(_local_level(0.0), InitialState([0.0], [[1e12]]), ys)
        n = np.arange(1, ys.size + 1)
        np.testing.assert_allclose(tr.filtered.mean[:, 0], np.cumsum(ys) / n, atol=1e-9)
        np.testing.assert_allclose(tr.filtered.cov[:, 0, 0], 1.0 / n, rtol=1e-9)

    def test_empty_series(self):
        tr = kalman_filter(_local_level(1.0), InitialState([0.0], [[1.0]]), [])
        assert len(tr) == 0 and tr.log_likelihood == 0.0

    def test_missing_skips_update(self):
        model = _local_level(1.0)
        tr = kalman_filter(model, InitialState([0.0], [[1.0]]), [1.0, np.nan, 2.0])
        np.testing.assert_array_equal(tr.filtered.mean[1], tr.predicted.mean[1])
        np.testing.assert_array_equal(tr.filtered.cov[1], tr.predicted.cov[1])

    def test_causal(self, seasonal):
        init = InitialState(np.zeros(15), 1e4 * np.eye(15))
        full = kalman_filter(seasonal.model, init, seasonal.ys)
        part = kalman_filter(seasonal.model, init, seasonal.ys[:50])
        np.testing.assert_array_equal(full.filtered.mean[:50], part.filtered.mean)
        np.testing.assert_array_equal(full.filtered.cov[:50], part.filtered.cov)

    def test_rejects_non_gaussian(self):
        model = build_trend_model(1, NoiseSpec.cauchy(1.0))
        with pytest.raises(UnsupportedModelError):
            kalman_filter(model, InitialState([0.0], [[1.0]]), [1.0])


class TestSmoother:
    def test_single_point_equals_filter(self):
        model = _local_level(1.0)
        tr, sm = smooth(model, InitialState([0.0], [[1.0]]), [0.7])
        np.testing.assert_array_equal(sm.mean, tr.filtered.mean)

    def test_static_level_is_full_mean(self):
        ys = np.array([1.0, 4.0, -2.0, 0.5, 3.0])
        _, sm = smooth(_local_level(0.0), InitialState([0.0], [[1e12]]), ys)
        np.testing.assert_allclose(sm.mean[:, 0], ys.mean(), atol=1e-8)

    def test_random_3d_against_oracle(self, rng):
        model, init = random_gaussian_model(rng, d=3, k=2)
        ys = rng.normal(size=5)
        _, sm = smooth(model, init, ys)
        o = _oracle(model, init, ys)
        np.testing.assert_allclose(sm.mean, o["smooth_mean"], atol=1e-8)
        np.testing.assert_allclose(sm.cov, o["smooth_cov"], atol=1e-8)

    def test_loewner_order(self, seasonal):
        init = InitialState(np.zeros(15), 1e4 * np.eye(15))
        tr, sm = smooth(seasonal.model, init, seasonal.ys)
        for t in range(0, 156, 17):
            assert np.linalg.eigvalsh(tr.filtered.cov[t] - sm.cov[t]).min() > -1e-8
            assert np.linalg.eigvalsh(tr.predicted.cov[t] - tr.filtered.cov[t]).min() > -1e-8

    def test_singular_predicted_cov_warns_and_finishes(self):
        # deterministic level with an exactly known start: P_{t|t-1} = 0
        model = StateSpaceModel(np.eye(1), np.zeros((1, 0)), np.ones(1), (), NoiseSpec.gaussian(1.0))
        with pytest.warns(RuntimeWarning):
            _, sm = smooth(model, InitialState([2.0], [[0.0]]), [1.0, 3.0])
        np.testing.assert_allclose(sm.mean[:, 0], 2.0)


class TestLikelihood:
    def test_scalar_n3_against_mvn(self):
        from scipy import stats

        model = _local_level(0.5, 2.0)
        ys = np.array([0.3, -1.0, 2.0])
        # y_t = x0 + sum v + w: covariance P0 + Q*min(s,t) + R*I
        s = np.arange(1, 4)
        cov = 1.5 + 0.5 * np.minimum.outer(s, s) + 2.0 * np.eye(3)
        expected = stats.multivariate_normal(np.zeros(3), cov).logpdf(ys)
        assert log_likelihood(model, InitialState([0.0], [[1.5]]), ys) == pytest.approx(expected, abs=1e-12)

    def test_empty(self):
        assert log_likelihood(_local_level(1.0), InitialState([0.0], [[1.0]]), []) == 0.0

    @pytest.mark.parametrize("e, grows", [(3.0, True), (0.5, False)])
    def test_doubling_R_one_term(self, e, grows):
        # one term -0.5 (log S + e^2/S) with S = 1 + R: doubling R from 1 to 2
        m, V = np.zeros(1), np.eye(1)
        _, _, t1 = kalman_update(np.ones(1), 1.0, e, m, V)
        _, _, t2 = kalman_update(np.ones(1), 3.0, e, m, V)
        assert (t2 > t1) == grows == (e * e > 2.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 6))
def test_matches_dense_oracle(seed, d, n):
    rng = np.random.default_rng(seed)
    model, init = random_gaussian_model(rng, d=d)
    ys = 2.0 * rng.normal(size=n)
    tr, sm = smooth(model, init, ys)
    o = _oracle(model, init, ys)
    np.testing.assert_allclose(tr.predicted.mean, o["pred_mean"], atol=1e-8)
    np.testing.assert_allclose(tr.predicted.cov, o["pred_cov"], atol=1e-8)
    np.testing.assert_allclose(tr.filtered.mean, o["filt_mean"], atol=1e-8)
    np.testing.assert_allclose(tr.filtered.cov, o["filt_cov"], atol=1e-8)
    np.testing.assert_allclose(sm.mean, o["smooth_mean"], atol=1e-8)
    np.testing.assert_allclose(sm.cov, o["smooth_cov"], atol=1e-8)
    assert tr.log_likelihood == pytest.approx(o["loglik"], abs=1e-8)
