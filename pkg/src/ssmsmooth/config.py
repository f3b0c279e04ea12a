"""INI model configuration files.

A configuration describes a trend + seasonal + AR decomposition model::

    [trend]
    order = 2
    noise_kind = mixture
    mixture_weights = 0.99, 0.01
    mixture_variances = 0.32124, 100000.0
    fixed = mixture_variances.2

    [seasonal]
    period = 12
    tau2 = 9.4276e-07

    [ar]
    coeffs = 1.17769, -0.33438
    tau2 = 43.03

    [obs]
    sigma2 = 15.916

Blocks other than ``[obs]`` are optional. Each noise is one of

* ``noise_kind = gaussian`` (the default) with ``tau2`` (``sigma2`` in
  ``[obs]``); a zero variance makes a block deterministic;
* ``noise_kind = mixture`` with ``mixture_weights`` and ``mixture_variances``;
* ``noise_kind = cauchy`` with ``cauchy_scale``.

``fixed`` lists parameters of the section that estimation must not change:
``tau2``, ``sigma2``, ``cauchy_scale``, ``mixture_variances.K`` (1-based) or
``coeffs``. Unknown sections and keys are rejected. Floats are written with
``repr`` so a save/load round trip is exact.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from typing import FrozenSet, Optional, Tuple

import numpy as np

from .errors import ConfigError, InvalidArgumentError
from .estimate import ParamVector
from .model import NoiseSpec, build_ar_model, build_seasonal_model, build_trend_model, compose

__all__ = ["BlockConfig", "ModelConfig", "parse_config", "load_config", "format_config", "save_config"]

_NOISE_KEYS = {"noise_kind", "mixture_weights", "mixture_variances", "cauchy_scale", "fixed"}
_ALLOWED = {
    "trend": {"order", "tau2"} | _NOISE_KEYS,
    "seasonal": {"period", "tau2"} | _NOISE_KEYS,
    "ar": {"coeffs", "tau2"} | _NOISE_KEYS,
    "obs": {"sigma2"} | _NOISE_KEYS,
}
_BLOCKS = ("trend", "seasonal", "ar")


@dataclass(frozen=True, eq=False)
class BlockConfig:
    """One section: its noise (None for a deterministic block) and structure."""

    kind: str
    noise: Optional[NoiseSpec]
    order: Optional[int] = None
    period: Optional[int] = None
    coeffs: Tuple[float, ...] = ()
    fixed: FrozenSet[str] = frozenset()

    @property
    def var_key(self):
        return "sigma2" if self.kind == "obs" else "tau2"


def _noise_params(block):
    """``(local name, value)`` pairs of the estimable noise parameters."""
    n = block.noise
    if n is None:
        return []
    if n.kind == "gaussian":
        return [(block.var_key, n.variances[0])]
    if n.kind == "gaussian_mixture":
        return [(f"mixture_variances.{i + 1}", v) for i, v in enumerate(n.variances)]
    return [("cauchy_scale", n.scale)]


def _with_noise_params(block, values):
    n = block.noise
    if n is None:
        return block
    if n.kind == "gaussian":
        noise = NoiseSpec.gaussian(values[block.var_key])
    elif n.kind == "gaussian_mixture":
        noise = NoiseSpec.mixture(n.weights, [values[f"mixture_variances.{i + 1}"] for i in range(len(n.variances))])
    else:
        noise = NoiseSpec.cauchy(values["cauchy_scale"], n.location)
    return replace(block, noise=noise)


@dataclass(frozen=True, eq=False)
class ModelConfig:
    trend: Optional[BlockConfig]
    seasonal: Optional[BlockConfig]
    ar: Optional[BlockConfig]
    obs: BlockConfig

    def blocks(self):
        return [b for b in (self.trend, self.seasonal, self.ar, self.obs) if b is not None]

    def build(self):
        """The :class:`~ssmsmooth.model.StateSpaceModel` this configuration describes."""
        parts = []
        for b in (self.trend, self.seasonal, self.ar):
            if b is None:
                continue
            tau2 = b.noise if b.noise is not None else 0.0
            if b.kind == "trend":
                parts.append(build_trend_model(b.order, tau2))
            elif b.kind == "seasonal":
                parts.append(build_seasonal_model(b.period, tau2))
            else:
                parts.append(build_ar_model(b.coeffs, tau2))
        if not parts:
            raise ConfigError("a model needs at least one of [trend], [seasonal], [ar]")
        return compose(parts, self.obs.noise)

    def parameters(self):
        """All estimable parameters as a :class:`~ssmsmooth.estimate.ParamVector`."""
        names, values, fixed, kinds = [], [], [], []
        for b in self.blocks():
            for local, v in _noise_params(b):
                names.append(f"{b.kind}.{local}")
                values.append(v)
                fixed.append(local in b.fixed)
                kinds.append("positive")
            for i, a in enumerate(b.coeffs):
                names.append(f"{b.kind}.coeffs.{i + 1}")
                values.append(a)
                fixed.append("coeffs" in b.fixed)
                kinds.append("ar")
        return ParamVector(tuple(names), np.array(values), tuple(fixed), tuple(kinds))

    def with_parameters(self, params):
        """Copy with parameter values taken from ``params`` (matched by name)."""
        d = params.as_dict()
        out = {}
        for b in self.blocks():
            local = {k.split(".", 1)[1]: v for k, v in d.items() if k.split(".", 1)[0] == b.kind}
            nb = _with_noise_params(b, {**dict(_noise_params(b)), **local})
            if b.coeffs:
                nb = replace(nb, coeffs=tuple(local.get(f"coeffs.{i + 1}", a) for i, a in enumerate(b.coeffs)))
            out[b.kind] = nb
        return ModelConfig(out.get("trend"), out.get("seasonal"), out.get("ar"), out["obs"])


def _floats(text, what):
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"{what}: cannot parse numbers from {text!r}") from exc


def _parse_noise(section, sec, var_key, deterministic_ok):
    kind = sec.get("noise_kind", "gaussian").strip().lower()
    try:
        if kind == "gaussian":
            if var_key not in sec:
                raise ConfigError(f"[{section}] needs {var_key}")
            (v,) = _floats(sec[var_key], f"[{section}] {var_key}")
            if v == 0 and deterministic_ok:
                return None
            return NoiseSpec.gaussian(v)
        if kind == "mixture":
            w = _floats(sec.get("mixture_weights", ""), f"[{section}] mixture_weights")
            v = _floats(sec.get("mixture_variances", ""), f"[{section}] mixture_variances")
            return NoiseSpec.mixture(w, v)
        if kind == "cauchy":
            (s,) = _floats(sec.get("cauchy_scale", ""), f"[{section}] cauchy_scale")
            return NoiseSpec.cauchy(s)
    except (InvalidArgumentError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc
    raise ConfigError(f"[{section}] unknown noise_kind {kind!r}")


def _int(sec, key, section):
    try:
        return int(sec[key])
    except KeyError as exc:
        raise ConfigError(f"[{section}] needs {key}") from exc
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} must be an integer") from exc


def parse_config(text):
    """Parse INI text into a :class:`ModelConfig`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    unknown = set(cp.sections()) - set(_ALLOWED)
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    if "obs" not in cp:
        raise ConfigError("configuration needs an [obs] section")
    blocks = {}
    for section in cp.sections():
        sec = cp[section]
        bad = set(sec) - _ALLOWED[section]
        if bad:
            raise ConfigError(f"[{section}] unknown key(s): {sorted(bad)}")
        var_key = "sigma2" if section == "obs" else "tau2"
        noise = _parse_noise(section, sec, var_key, deterministic_ok=section != "obs")
        fixed = frozenset(x.strip() for x in sec.get("fixed", "").replace(",", " ").split() if x.strip())
        kw = {}
        if section == "trend":
            kw["order"] = _int(sec, "order", section)
        elif section == "seasonal":
            kw["period"] = _int(sec, "period", section) if "period" in sec else 12
        elif section == "ar":
            if "coeffs" not in sec:
                raise ConfigError("[ar] needs coeffs")
            kw["coeffs"] = _floats(sec["coeffs"], "[ar] coeffs")
        block = BlockConfig(section, noise, fixed=fixed, **kw)
        known = {k for k, _ in _noise_params(block)} | ({"coeffs"} if section == "ar" else set())
        if fixed - known:
            raise ConfigError(f"[{section}] fixed names unknown parameter(s): {sorted(fixed - known)}")
        blocks[section] = block
    config = ModelConfig(blocks.get("trend"), blocks.get("seasonal"), blocks.get("ar"), blocks["obs"])
    try:
        config.build()
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _join(xs):
    return ", ".join(repr(float(x)) for x in xs)


def format_config(config):
    """INI text for ``config``; :func:`parse_config` inverts it exactly."""
    lines = []
    for b in config.blocks():
        lines.append(f"[{b.kind}]")
        if b.kind == "trend":
            lines.append(f"order = {b.order}")
        elif b.kind == "seasonal":
            lines.append(f"period = {b.period}")
        elif b.kind == "ar":
            lines.append(f"coeffs = {_join(b.coeffs)}")
        n = b.noise
        if n is None:
            lines.append(f"{b.var_key} = 0.0")
        elif n.kind == "gaussian":
            lines.append(f"{b.var_key} = {n.variances[0]!r}")
        elif n.kind == "gaussian_mixture":
            lines += ["noise_kind = mixture", f"mixture_weights = {_join(n.weights)}", f"mixture_variances = {_join(n.variances)}"]
        else:
            lines += ["noise_kind = cauchy", f"cauchy_scale = {float(n.scale)!r}"]
        if b.fixed:
            lines.append(f"fixed = {', '.join(sorted(b.fixed))}")
        lines.append("")
    return "\n".join(lines)


def save_config(config, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(config))
