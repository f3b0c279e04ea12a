import csv

import numpy as np
import pytest

from ssmsmooth.datasets import inject_jumps, piecewise_trend_mean, simulate_piecewise_trend, simulate_seasonal
from ssmsmooth.decompose import DecompositionSeries, from_gaussian, from_mixtures, from_quantiles, write_csv
from ssmsmooth.errors import InvalidArgumentError
from ssmsmooth.gsum import GaussianMixtureState
from ssmsmooth.kalman import GaussianSequence
from ssmsmooth.model import build_trend_model
from ssmsmooth.particle import QUANTILE_PROBS, gaussian_sampler, particle_filter


class TestPiecewise:
    def test_levels_at_boundaries(self):
        phi = piecewise_trend_mean()
        # 0-based index k is row k + 1
        assert phi[99] == 0.0 and phi[100] == -1.0
        assert phi[249] == -1.0 and phi[250] == 1.0
        assert phi[349] == 1.0 and phi[350] == 0.0 and phi[499] == 0.0

    def test_deterministic_and_unit_noise(self):
        a, b = simulate_piecewise_trend(3), simulate_piecewise_trend(3)
        np.testing.assert_array_equal(a, b)
        resid = a - piecewise_trend_mean()
        assert abs(resid.std() - 1.0) < 0.1

    def test_truncated(self):
        assert simulate_piecewise_trend(0, n=120).shape == (120,)


class TestSeasonal:
    def test_shape_and_determinism(self):
        a, b = simulate_seasonal(2), simulate_seasonal(2)
        np.testing.assert_array_equal(a.ys, b.ys)
        assert a.ys.shape == (156,) and a.states.shape == (156, 15)

    def test_components_sum_to_signal(self):
        s = simulate_seasonal(4)
        signal = sum(s.components.values())
        np.testing.assert_allclose(signal, s.states @ np.ravel(s.model.H), atol=1e-9)

    def test_seasonal_component_sums_to_noise(self):
        s = simulate_seasonal(5)
        season = s.components["seasonal"]
        # twelve consecutive values sum to one seasonal shock
        sums = np.convolve(season, np.ones(12), mode="valid")
        assert np.abs(sums).max() < 6 * np.sqrt(0.98741e-3)


class TestInjectJumps:
    def test_rows(self):
        d = inject_jumps(np.zeros(156))
        assert np.all(d[:79] == 0) and np.all(d[79:100] == 150) and np.all(d[100:] == -100)

    def test_input_untouched(self):
        ys = np.zeros(120)
        inject_jumps(ys)
        assert not ys.any()

    def test_too_short(self):
        with pytest.raises(InvalidArgumentError):
            inject_jumps(np.zeros(100))


class TestDecompose:
    def test_gaussian_bands(self):
        model = build_trend_model(2, 1.0)
        seq = GaussianSequence(np.array([[1.0, 0.0], [2.0, 1.0]]), np.array([np.diag([4.0, 1.0]), np.diag([9.0, 1.0])]))
        d = from_gaussian(model, seq)
        np.testing.assert_allclose(d["trend_mean"], [1.0, 2.0])
        np.testing.assert_allclose(d["trend_lo2"], [-3.0, -4.0])
        np.testing.assert_allclose(d["trend_hi2"], [5.0, 8.0])

    def test_mixture_bands_use_total_variance(self):
        model = build_trend_model(1, 1.0)
        mx = GaussianMixtureState(np.log([0.5, 0.5]), np.array([[0.0], [2.0]]), np.ones((2, 1, 1)))
        d = from_mixtures(model, [mx])
        assert d["trend_mean"][0] == pytest.approx(1.0)
        assert d["trend_hi2"][0] == pytest.approx(1.0 + 2.0 * np.sqrt(2.0))

    def test_quantile_columns(self):
        res = particle_filter(build_trend_model(1, 1.0), gaussian_sampler([0.0], [[1.0]]), [0.1, 0.2], 50, seed=0)
        d = from_quantiles(res.filtered)
        assert d.names == tuple(f"trend_q{p}" for p in QUANTILE_PROBS)

    def test_csv_missing_written_empty(self, tmp_path):
        p = tmp_path / "o.csv"
        write_csv(p, ["a", "b"], np.array([1.0, np.nan]), DecompositionSeries({"x_mean": np.array([0.5, 0.25])}))
        with open(p, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows == [["time", "y", "x_mean"], ["a", "1.0", "0.5"], ["b", "", "0.25"]]
        assert not list(tmp_path.glob(".ssm-*"))
