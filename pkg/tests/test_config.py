import numpy as np
import pytest

from conftest import CONFIGS
from ssmsmooth.config import format_config, load_config, parse_config
from ssmsmooth.errors import ConfigError


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path):
    cfg = load_config(path)
    again = parse_config(format_config(cfg))
    a, b = cfg.build(), again.build()
    for attr in ("F", "G", "H"):
        np.testing.assert_array_equal(getattr(a, attr), getattr(b, attr))
    assert a.system_noise == b.system_noise and a.obs_noise == b.obs_noise
    assert cfg.parameters() == again.parameters()


def test_seasonal_ar2_dimensions():
    m = load_config(CONFIGS / "seasonal_ar2.ini").build()
    assert (m.state_dim, m.noise_dim) == (15, 3)


def test_mixture_fixed_flag():
    p = load_config(CONFIGS / "jump_mixture.ini").parameters()
    assert dict(zip(p.names, p.fixed)) == {
        "trend.mixture_variances.1": False,
        "trend.mixture_variances.2": True,
        "seasonal.tau2": False,
        "ar.tau2": False,
        "ar.coeffs.1": False,
        "ar.coeffs.2": False,
        "obs.sigma2": False,
    }


def test_with_parameters():
    cfg = load_config(CONFIGS / "jump_mixture.ini")
    p = cfg.parameters().with_values(**{"trend.mixture_variances.1": 0.5, "ar.coeffs.1": 0.9})
    m = cfg.with_parameters(p).build()
    assert m.system_noise[0].variances == (0.5, 1e5)
    assert m.F[13, 13] == 0.9


def test_cauchy_parameters():
    p = load_config(CONFIGS / "cauchy_trend.ini").parameters()
    assert p.names == ("trend.cauchy_scale", "obs.sigma2")


def test_deterministic_block():
    cfg = parse_config("[trend]\norder = 2\ntau2 = 0\n[ar]\ncoeffs = 0.5\ntau2 = 1\n[obs]\nsigma2 = 1\n")
    assert cfg.build().noise_dim == 1
    assert "trend.tau2" not in cfg.parameters().names
    assert parse_config(format_config(cfg)).build().noise_dim == 1


@pytest.mark.parametrize(
    "text, match",
    [
        ("[trend]\norder = 1\ntau2 = 1\n", "obs"),
        ("[obs]\nsigma2 = 1\n[bogus]\nx = 1\n", "unknown section"),
        ("[obs]\nsigma2 = 1\ncolour = red\n", "unknown key"),
        ("[trend]\norder = 3\ntau2 = 1\n[obs]\nsigma2 = 1\n", "order"),
        ("[trend]\norder = x\ntau2 = 1\n[obs]\nsigma2 = 1\n", "integer"),
        ("[obs]\nsigma2 = 0\n", "variance > 0"),
        ("[obs]\nsigma2 = abc\n", "parse"),
        ("[trend]\norder = 1\nnoise_kind = mixture\nmixture_weights = 0.5, 0.4\nmixture_variances = 1, 2\n[obs]\nsigma2 = 1\n", "sum"),
        ("[trend]\norder = 1\nnoise_kind = laplace\n[obs]\nsigma2 = 1\n", "noise_kind"),
        ("[trend]\norder = 1\ntau2 = 1\nfixed = sigma2\n[obs]\nsigma2 = 1\n", "fixed"),
        ("[obs]\nsigma2 = 1\n", "at least one"),
        ("not an ini file", "malformed"),
    ],
)
def test_invalid(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")
