"""Command-line interface: ``lrvlab <command> [options]``.

Exit status is 0 on success, 1 on usage errors and 2 on data or domain
errors.  JSON output carries ``"schema": "lrvlab/1"``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diffseq import optimal_sequence, zero_sequence
from .estimators import EstimatorConfig, as_series, lrv
from .exceptions import ConfigError, LrvError
from .inference import ks_test, local_linear_trend, scb, wz_test
from .io import format_series, read_series
from .rcp import rough_center
from .selection import PRESETS, preset, suggested_estimator
from .simlab import run_experiment

__all__ = ["RunConfig", "main", "run"]

SCHEMA = "lrvlab/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Parsed invocation."""

    command: str
    input: str | None = None
    output: str | None = None
    preset: str = "paper-default"
    seed: int = 0
    format: str = "json"
    options: dict = field(default_factory=dict)


def _common(p, data=True):
    if data:
        p.add_argument("data", help="CSV file, one column per coordinate")
    p.add_argument("--out", help="write the result here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)


def _estimator_flags(p):
    p.add_argument("--preset", default="paper-default", choices=list(PRESETS))
    p.add_argument("--m", type=int, help="order of the difference sequence")
    p.add_argument("--kernel", help='kernel spec, e.g. "parzen_poly:q=2"')
    p.add_argument("--ell", type=int, help="fixed bandwidth (skips the plug-in rule)")
    p.add_argument("--lambda", dest="lam", type=float, default=2.0, help="lag ratio h/ell for a fixed bandwidth")
    p.add_argument("--no-rcp", action="store_true", help="skip rough centering")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrvlab", description="Robust long-run variance estimation")
    parser.add_argument("--version", action="version", version=f"lrvlab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate the long-run variance")
    _common(p)
    _estimator_flags(p)

    p = sub.add_parser("center", help="roughly center a series (CSV out, report JSON)")
    _common(p)
    p.add_argument("--report", help="write the centering report JSON here (default: stderr)")
    p.add_argument("--max-jumps", type=int, default=10)
    p.add_argument("--m-prime", type=float, default=100.0)

    p = sub.add_parser("test", help="change-point tests")
    tests = p.add_subparsers(dest="test", parser_class=_Parser)
    for name in ("ks", "wz"):
        t = tests.add_parser(name)
        _common(t)
        _estimator_flags(t)
        t.add_argument("--lrv", default="auto", help='"auto" or a positive number')
        t.add_argument("--level", type=float, default=0.05)
        if name == "wz":
            t.add_argument("--beta", type=float, default=0.6)
            t.add_argument("--reps", type=int, default=10_000)

    p = sub.add_parser("trend", help="jackknifed local-linear trend on i/n")
    _common(p)
    p.add_argument("--b", type=float, required=True, help="smoothing bandwidth in (0, 1/2)")

    p = sub.add_parser("scb", help="simultaneous confidence band for the trend")
    _common(p)
    _estimator_flags(p)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--b-star", type=float)
    p.add_argument("--bandwidth", type=float, help="fixed smoothing bandwidth")
    p.add_argument("--reps", type=int, default=1000)

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment from a JSON/TOML config")
    _common(p, data=False)
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("bench", help="time the suggested estimator on synthetic data")
    _common(p, data=False)
    _estimator_flags(p)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--reps", type=int, default=100)
    return parser


def _emit(args, payload: dict | None = None, text: str | None = None):
    if payload is not None:
        text = json.dumps({"schema": SCHEMA, **payload}, indent=2, default=_json_default) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _plugin(args):
    return preset(args.preset, m=args.m, kernel=args.kernel, apply_rcp=False if args.no_rcp else None)


def _estimate(args, data):
    if args.ell is not None:
        m = 3 if args.m is None else args.m
        seq = zero_sequence() if m == 0 else optimal_sequence(m)
        h = 1 if m == 0 else int(round(args.lam * args.ell))
        config = EstimatorConfig(seq, args.kernel or "parzen_poly:q=2", args.ell, max(h, 1))
        x = data
        if not args.no_rcp and m > 0:
            x = np.column_stack([rough_center(data[:, j])[0] for j in range(data.shape[1])])
        return lrv(x, config)
    return suggested_estimator(data, _plugin(args))


def _lrv_payload(result, data):
    out = {"value": result.value, "ell": result.config_used.ell, "h": result.config_used.h,
           "regime": result.regime, "config": result.config_used.to_dict()}
    for key in ("ell_star", "fallback", "rcp"):
        if key in result.extras:
            out[key] = result.extras[key]
    if data.shape[1] == 2:
        v = result.value
        if v[0, 0] > 0 and v[1, 1] > 0:
            out["long_run_correlation"] = float(np.clip(v[0, 1] / math.sqrt(v[0, 0] * v[1, 1]), -1, 1))
    return out


def cmd_estimate(args):
    data, _ = read_series(args.data)
    result = _estimate(args, data)
    payload = _lrv_payload(result, data)
    if args.format == "csv":
        _emit(args, text=format_series(np.atleast_2d(result.value)))
    else:
        _emit(args, {"command": "estimate", **payload})


def cmd_center(args):
    data, header = read_series(args.data)
    columns, reports = [], []
    for j in range(data.shape[1]):
        col, rep = rough_center(data[:, j], args.max_jumps, args.m_prime)
        columns.append(col)
        reports.append(rep.to_dict())
    _emit(args, text=format_series(np.column_stack(columns), header))
    report = json.dumps({"schema": SCHEMA, "command": "center",
                         "reports": reports if len(reports) > 1 else reports[0]}, indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(report, encoding="utf-8")
    else:
        sys.stderr.write(report)


def _v_hat(args, y):
    if args.lrv == "auto":
        return suggested_estimator(y, _plugin(args))
    try:
        return float(args.lrv)
    except ValueError:
        raise UsageError(f"--lrv must be 'auto' or a number, got {args.lrv!r}") from None


def cmd_test(args):
    if args.test is None:
        raise UsageError("test: choose 'ks' or 'wz'")
    data, _ = read_series(args.data)
    y = as_series(data).column(0)
    v = _v_hat(args, y)
    if args.test == "ks":
        res = ks_test(y, v, args.level)
    else:
        res = wz_test(y, v, args.beta, args.level, args.reps, seed=args.seed)
    payload = res.to_dict()
    if "lrv" in payload:
        payload["lrv"] = {k: payload["lrv"][k] for k in ("value", "regime", "config")}
    _emit(args, {"command": f"test {args.test}", **payload})


def cmd_trend(args):
    data, _ = read_series(args.data)
    y = as_series(data).column(0)
    t = np.arange(1, y.size + 1) / y.size
    mu = local_linear_trend(y, args.b)
    if args.format == "csv":
        _emit(args, text=format_series(np.column_stack([t, mu]), ["t", "mu_hat"]))
    else:
        _emit(args, {"command": "trend", "b": args.b, "t": t, "mu_hat": mu})


def cmd_scb(args):
    data, _ = read_series(args.data)
    y = as_series(data).column(0)
    v = suggested_estimator(y, _plugin(args))
    band = scb(y, args.level, args.b_star, args.reps, args.seed, v_hat=v, bandwidth=args.bandwidth)
    if args.format == "csv":
        table = np.column_stack([band.grid, band.mu_hat, band.lower, band.upper])
        _emit(args, text=format_series(table, ["t", "mu_hat", "lower", "upper"]))
    else:
        _emit(args, {"command": "scb", **band.to_dict()})


def _load_config(path):
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def cmd_simulate(args):
    try:
        config = _load_config(args.config)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load experiment config {args.config}: {exc}") from exc
    if args.reps is not None:
        config["reps"] = args.reps
    table = run_experiment(config, seed=args.seed, workers=args.workers)
    if args.format == "csv":
        _emit(args, text=table.to_csv())
    else:
        _emit(args, {"command": "simulate", **table.to_dict()})


def cmd_bench(args):
    rng = np.random.default_rng(args.seed)
    cfg = _plugin(args)
    x = rng.standard_normal(args.n)
    suggested_estimator(x, cfg)
    start = time.perf_counter()
    for _ in range(args.reps):
        suggested_estimator(x, cfg)
    elapsed = time.perf_counter() - start
    _emit(args, {"command": "bench", "n": args.n, "reps": args.reps,
                 "seconds_per_call": elapsed / max(args.reps, 1), "config": cfg.to_dict()})


COMMANDS = {
    "estimate": cmd_estimate,
    "center": cmd_center,
    "test": cmd_test,
    "trend": cmd_trend,
    "scb": cmd_scb,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing command; see lrvlab --help")
        COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except (LrvError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
