"""Command-line interface: ``ssm simulate | inject-jumps | fit | run``.

Series files are CSV with an optional header and either one value column
or a time label followed by a value; empty fields are missing values.
Exit status is 0 on success, 1 for input or configuration errors, 2 for
usage errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import datasets
from .config import format_config, load_config
from .decompose import from_gaussian, from_mixtures, from_quantiles, write_csv
from .errors import NumericalFailureError, SSMError
from .estimate import FitOptions, ParamVector, default_params, fit
from .gsum import gsum_filter, gsum_smooth
from .kalman import kalman_filter, smooth
from .model import diffuse_init
from .particle import (
    data_scaled_sampler,
    fixed_lag_average_smooth,
    fixed_lag_smooth,
    particle_filter,
    pilot_boundary_priors,
    two_filter_particle_smooth,
)
from .twofilter import two_filter_smooth_covariance, two_filter_smooth_information

__all__ = ["main", "read_series", "write_series", "format_report", "parse_report", "METHODS"]

EXIT_OK, EXIT_INPUT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

METHODS = ("kalman-filter", "fis", "tf-cov", "tf-info", "gsum", "gsum-tf", "pf", "pf-lag", "pf-tf", "pf-lag-avg")
PARTICLE_METHODS = ("pf", "pf-lag", "pf-tf", "pf-lag-avg")

logger = logging.getLogger("ssmsmooth.cli")


class InputError(SSMError):
    pass


def _number(text):
    text = text.strip()
    return math.nan if text == "" else float(text)


def read_series(path):
    """``(time_labels, values)`` from a series CSV.

    With two or more columns the first is a time label (e.g. an ISO date)
    and the second the value; a single column is the value and rows are
    numbered from 1. A first row whose value does not parse is a header.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    labels, values = [], []
    for i, row in enumerate(rows):
        field = row[1] if len(row) > 1 else row[0]
        try:
            v = _number(field)
        except ValueError:
            if i == 0:
                continue
            raise InputError(f"{path}: row {i + 1}: cannot parse {field!r} as a number") from None
        labels.append(row[0].strip() if len(row) > 1 else str(len(labels) + 1))
        values.append(v)
    if not values:
        raise InputError(f"{path}: no data rows")
    return labels, np.array(values)


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".ssm-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_series(path, labels, values):
    lines = ["time,y"]
    lines += [f"{t},{'' if not np.isfinite(v) else repr(float(v))}" for t, v in zip(labels, values)]
    _atomic_write(path, "\n".join(lines) + "\n")


def format_report(result):
    """Two-column parameter table; fixed parameters carry a ``fixed`` marker."""
    p = result.params
    lines = []
    if not result.converged:
        lines.append(f"# warning: fit did not converge after {result.n_evals} evaluations ({result.message})")
    lines.append("parameter\tvalue")
    for n, v, f in zip(p.names, p.values, p.fixed):
        lines.append(f"{n}\t{float(v)!r}" + ("\tfixed" if f else ""))
    lines.append(f"neg_log_likelihood\t{float(result.neg_log_likelihood)!r}")
    return "\n".join(lines) + "\n"


def parse_report(text):
    """Inverse of :func:`format_report`: ``(ParamVector, neg_log_likelihood)``."""
    names, values, fixed, nll = [], [], [], None
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if parts[0] == "parameter":
            continue
        if parts[0] == "neg_log_likelihood":
            nll = float(parts[1])
            continue
        names.append(parts[0])
        values.append(float(parts[1]))
        fixed.append(len(parts) > 2 and parts[2] == "fixed")
    return ParamVector(tuple(names), np.array(values), tuple(fixed)), nll


def _cmd_simulate(args):
    if args.kind == "trend":
        ys = datasets.simulate_piecewise_trend(args.seed, args.n or 500)
    else:
        ys = datasets.simulate_seasonal(args.seed, args.n or 156).ys
    write_series(args.out, [str(i + 1) for i in range(ys.size)], ys)


def _cmd_inject(args):
    labels, ys = read_series(args.data)
    write_series(args.out, labels, datasets.inject_jumps(ys, args.up, args.down))


def _cmd_fit(args):
    config = load_config(args.model)
    _, ys = read_series(args.data)
    params = config.parameters()
    if not args.keep_init:
        params = default_params(params, ys)
    result = fit(config, ys, params, FitOptions(max_evals=args.max_evals, M_max=args.mmax, init_scale=args.init_scale))
    report = format_report(result)
    if args.out:
        _atomic_write(args.out, report)
    else:
        sys.stdout.write(report)
    if args.out_config:
        _atomic_write(args.out_config, format_config(config.with_parameters(result.params)))


def _particle_samplers(args, model, ys):
    kind = args.particle_init
    if kind == "auto":
        kind = "pilot" if model.is_gaussian else "data"
    if kind == "pilot":
        _, fwd, bwd = pilot_boundary_priors(model, ys, args.init_scale)
        return fwd, bwd
    return data_scaled_sampler(model, ys), None


def _require(args, name, flag):
    if getattr(args, name) is None:
        raise argparse.ArgumentTypeError(f"method {args.method} requires {flag}")


def run_method(args, model, ys):
    """Run ``args.method`` and return its :class:`DecompositionSeries`."""
    method = args.method
    if method in PARTICLE_METHODS:
        fwd, bwd = _particle_samplers(args, model, ys)
        if method == "pf":
            qs = particle_filter(model, fwd, ys, args.m, args.seed).filtered
        elif method == "pf-lag":
            qs = fixed_lag_smooth(model, ys, args.m, args.lag, seed=args.seed, init_sampler=fwd)
        elif method == "pf-tf":
            qs = two_filter_particle_smooth(model, ys, args.m, args.r, args.seed, init_sampler=fwd, backward_init_sampler=bwd)
        else:
            qs = fixed_lag_average_smooth(model, ys, args.m, args.lag, args.seed, init_sampler=fwd, backward_init_sampler=bwd)
        return from_quantiles(qs)
    init = diffuse_init(model, ys, args.init_scale)
    if method == "kalman-filter":
        return from_gaussian(model, kalman_filter(model, init, ys).filtered)
    if method == "fis":
        return from_gaussian(model, smooth(model, init, ys)[1])
    if method == "tf-cov":
        how = args.backward_init or "filter"
        res = two_filter_smooth_covariance(model, init, ys, how, args.period, args.init_scale)
        return from_gaussian(model, res.smoothed)
    if method == "tf-info":
        return from_gaussian(model, two_filter_smooth_information(model, init, ys).smoothed)
    if method == "gsum":
        return from_mixtures(model, gsum_filter(model, init, ys, args.mmax).filtered)
    how = args.backward_init or "diffuse"
    res = gsum_smooth(model, init, ys, args.mmax, how, args.period, args.init_scale)
    return from_mixtures(model, res.smoothed)


def _cmd_run(args):
    if args.method in ("pf-lag", "pf-lag-avg"):
        _require(args, "lag", "--lag")
    if args.method == "pf-tf":
        _require(args, "r", "--r")
    config = load_config(args.model)
    labels, ys = read_series(args.data)
    model = config.build()
    write_csv(args.out, labels, ys, run_method(args, model, ys))


def _parser():
    p = argparse.ArgumentParser(prog="ssm", description="State-space filtering, smoothing and decomposition.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a synthetic test series")
    s.add_argument("--kind", choices=("trend", "seasonal"), default="trend")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=None, help="length (default 500 for trend, 156 for seasonal)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_simulate)

    j = sub.add_parser("inject-jumps", help="shift rows 80-100 up and rows 101.. down")
    j.add_argument("--data", required=True)
    j.add_argument("--out", required=True)
    j.add_argument("--up", type=float, default=150.0)
    j.add_argument("--down", type=float, default=100.0)
    j.set_defaults(func=_cmd_inject)

    f = sub.add_parser("fit", help="maximum-likelihood estimation of the model parameters")
    f.add_argument("--model", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--out", help="report path (default: stdout)")
    f.add_argument("--out-config", help="write the fitted model configuration here")
    f.add_argument("--mmax", type=int, default=6)
    f.add_argument("--max-evals", type=int, default=2000)
    f.add_argument("--init-scale", type=float, default=1e7)
    f.add_argument("--keep-init", action="store_true", help="start from the configured values instead of the data-scaled defaults")
    f.set_defaults(func=_cmd_fit)

    r = sub.add_parser("run", help="filter or smooth and write a decomposition CSV")
    r.add_argument("--method", required=True, choices=METHODS)
    r.add_argument("--model", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--m", type=int, default=10_000, help="number of particles")
    r.add_argument("--lag", type=int, default=None)
    r.add_argument("--r", type=int, default=None, help="backward particles per two-filter weight")
    r.add_argument("--mmax", type=int, default=6)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--init-scale", type=float, default=1e7)
    r.add_argument(
        "--backward-init",
        choices=("filter", "inflated", "diffuse"),
        default=None,
        help="backward start for tf-cov (default filter) and gsum-tf (default diffuse)",
    )
    r.add_argument("--period", type=int, default=12)
    r.add_argument("--particle-init", choices=("auto", "data", "pilot"), default="auto")
    r.set_defaults(func=_cmd_run)
    return p


def main(argv=None):
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        print(f"ssm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailureError as exc:
        print(f"ssm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SSMError, OSError) as exc:
        print(f"ssm: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
