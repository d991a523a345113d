"""Command line interface: ``isoproj {fit,test,simulate,rates}``.

Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
errors. ``simulate`` and ``rates`` read an optional ``--config`` file whose
keys mirror the long flags (``--error-dist`` <-> ``error_dist``); flags win.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import plotting, report
from .config import ConfigError, parse_field, read_config
from .conjugate import Fixed, InverseGamma, PlugInMLE, PriorSpec, SigmaGrid, Type1, Type2, Type3
from .data import DataError, load_dataset
from .inference import draw_projection_posterior, summarize
from .isotonic import L1, L2
from .montest import (
    ADAPTIVE,
    FIXED,
    TestConfig,
    calibrate_m0,
    default_rate_constant,
    run_test,
    separation_curve,
)
from .simulate import L1_EMPIRICAL, SimConfig, SinusoidFamily, run_power_study, run_rate_study


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


SIM_FIELDS = {
    "truth": "truths", "sigma0": float, "error_dist": str, "design": str,
    "n_grid": "ints", "reps": int, "seed": int, "k_bound": float, "draws": int,
}
TEST_FIELDS = {
    "mode": str, "gamma": float, "m0": float, "rate_constant": float, "samples": int,
    "study": str, "separations": "floats", "k": int,
}
RATE_FIELDS = {"metric": str, "prior": str, "sigma": str, "J": str}


def sigma_mode(value: str):
    value = value.strip().lower()
    if value == "plugin":
        return PlugInMLE()
    if value == "ig":
        return InverseGamma()
    if value == "grid":
        return SigmaGrid()
    try:
        return Fixed(float(value))
    except ValueError:
        raise ConfigError(f"invalid value for 'sigma': {value!r} (plugin, ig, grid or a number)") from None


def build_prior(kind: str, J: str, sigma: str) -> PriorSpec:
    kind = kind.strip().lower()
    if J is None or str(J).lower() == "auto":
        J_val = None
    else:
        J_val = parse_field("J", str(J), int)
        if J_val < 1:
            raise ConfigError("invalid value for 'J': must be a positive integer or 'auto'")
    if kind == "type1":
        ptype = Type1(J_val)
    elif kind == "type2":
        ptype = Type2(J_val)
    elif kind == "type3":
        ptype = Type3()
    else:
        raise ConfigError(f"invalid value for 'prior': {kind!r} (type1, type2 or type3)")
    return PriorSpec(prior_type=ptype, sigma_mode=sigma_mode(sigma))


def _add_fields(p, fields):
    for key in fields:
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar=key.upper())


def _merged(args, fields) -> dict:
    """Config-file values overridden by flags, converted per field kind."""
    raw = read_config(args.config) if args.config else {}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}")
    for key in fields:
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    return {k: parse_field(k, v, fields[k]) for k, v in raw.items()}


def _sim_config(values) -> SimConfig:
    kwargs = {}
    names = {"truth": "truths"}
    for key in SIM_FIELDS:
        if key in values:
            kwargs[names.get(key, key)] = values[key]
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def _emit(doc, out):
    text = report.dumps(doc)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _figure_path(args):
    if getattr(args, "no_figure", False):
        return None
    if args.figure:
        return args.figure
    if args.csv:
        return str(Path(args.csv).with_suffix(".png"))
    return None


# --- subcommands -----------------------------------------------------------

def cmd_fit(args):
    data = load_dataset(args.data)
    prior = build_prior(args.prior, args.J, args.sigma)
    rng = np.random.default_rng(args.seed)
    start = time.perf_counter()
    samples = draw_projection_posterior(data, prior, args.samples, args.metric, rng, args.weights)
    summary = summarize(samples, args.grid_size, args.alpha)
    elapsed = time.perf_counter() - start
    Js = [s.raw.partition.J for s in samples]
    doc = {
        "command": "fit",
        "config": {"data": args.data, "prior": args.prior, "J": args.J, "sigma": args.sigma,
                   "samples": args.samples, "metric": args.metric, "weights": args.weights,
                   "grid_size": args.grid_size, "alpha": args.alpha},
        "seed": args.seed,
        "n": data.n,
        "J": {str(J): Js.count(J) for J in sorted(set(Js))},
        "sigma_mean": float(np.mean([s.sigma_draw for s in samples])),
        "summary": {"x": summary.grid, "mean": summary.mean_curve, "median": summary.median_curve,
                    "lo": summary.lower_band, "hi": summary.upper_band},
    }
    if args.keep_draws:
        doc["draws"] = [{"J": s.raw.partition.J, "l1": s.discrepancy_l1, "l2": s.discrepancy_l2,
                         "sigma": s.sigma_draw} for s in samples]
    if args.timing:
        doc["timing"] = {"seconds": elapsed}
    _emit(doc, args.out)
    if args.csv:
        report.write_csv(args.csv, report.CURVE_HEADER, report.curve_rows(summary))
    fig = _figure_path(args)
    if fig:
        plotting.plot_fit(summary, data, fig)


def cmd_test(args):
    data = load_dataset(args.data)
    mode = {"fixed": FIXED, "adaptive": ADAPTIVE}[args.mode]
    if mode == FIXED:
        prior = build_prior("type1", "auto", args.sigma)
    else:
        prior = build_prior("type3", "auto", args.sigma)
    m0 = 1.0
    calibrated = args.m0 == "calibrate"
    if not calibrated:
        m0 = parse_field("m0", args.m0, float)
    rate_constant = parse_field("rate_constant", args.rate_constant, float)
    try:
        cfg = TestConfig(gamma=args.gamma, rate_constant=rate_constant, m0=m0, mode=mode,
                         sample_count=args.samples)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if calibrated:
        cal = calibrate_m0(data, prior, cfg, seed=args.seed, reps=args.calibration_reps)
        cfg = TestConfig(gamma=cfg.gamma, rate_constant=cfg.rate_constant, m0=cal, mode=mode,
                         sample_count=cfg.sample_count)
    result = run_test(data, cfg, np.random.default_rng(args.seed), prior)
    doc = {"command": "test", **result.as_dict(), "seed": args.seed, "sigma": args.sigma}
    if mode == ADAPTIVE:
        doc["m0"] = cfg.m0
        doc["m0_calibrated"] = calibrated
    _emit(doc, args.out)


def _test_cfg(values) -> TestConfig:
    try:
        return TestConfig(gamma=values.get("gamma", 0.5), rate_constant=values.get("rate_constant"),
                          m0=values.get("m0", 1.0), mode=values.get("mode", FIXED),
                          sample_count=values.get("samples", 200))
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def cmd_simulate(args):
    values = _merged(args, {**SIM_FIELDS, **TEST_FIELDS})
    cfg = _sim_config(values)
    test_cfg = _test_cfg(values)
    study = values.get("study", "power")
    doc = {"command": "simulate", "study": study, "config": values, "seed": cfg.seed}
    start = time.perf_counter()
    if study == "power":
        try:
            rows = run_power_study(cfg, None, test_cfg)
        except ValueError as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        header = ("truth", "n", "mode", "rejection_rate", "mc_se")
        table = [[r[h] for h in header] for r in rows]
        doc["rows"] = rows
        plot = lambda path: plotting.plot_power(rows, path)  # noqa: E731
    elif study == "separation":
        seps = values.get("separations")
        if not seps:
            raise ConfigError("invalid config: 'separations' is required for study = separation")
        family = SinusoidFamily(sigma0=cfg.sigma0, k=values.get("k", 1),
                                error_dist=cfg.error_dist, design=cfg.design)
        n = cfg.n_grid[0]
        try:
            sep_rows = separation_curve(family, n, test_cfg, seps, cfg.reps, cfg.seed)
        except ValueError as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        header = ("separation", "power", "mc_se")
        table = [list(r) for r in sep_rows]
        doc["n"] = n
        doc["rows"] = [dict(zip(header, r)) for r in sep_rows]
        tau = None
        if test_cfg.mode == FIXED:
            m_n = test_cfg.rate_constant or default_rate_constant(n)
            tau = m_n * n ** (-1.0 / 3.0)
            doc["tau"] = tau
        plot = lambda path: plotting.plot_separation(sep_rows, path, tau)  # noqa: E731
    else:
        raise ConfigError(f"invalid value for 'study': {study!r} (power or separation)")
    if args.timing:
        doc["timing"] = {"seconds": time.perf_counter() - start}
    _emit(doc, args.out)
    if args.csv:
        report.write_csv(args.csv, header, table)
    fig = _figure_path(args)
    if fig:
        plot(fig)


def cmd_rates(args):
    values = _merged(args, {**SIM_FIELDS, **RATE_FIELDS})
    cfg = _sim_config(values)
    prior = build_prior(values.get("prior", "type1"), values.get("J", "auto"),
                        values.get("sigma", "plugin"))
    metric = values.get("metric", L1_EMPIRICAL)
    try:
        rep = run_rate_study(cfg, prior, metric)
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    doc = {"command": "rates", "config": values, "seed": cfg.seed, "metric": rep.metric,
           "slope": rep.slope, "slope_se": rep.slope_se, "rows": rep.rows()}
    if args.timing:
        doc["timing"] = {"seconds_per_n": rep.runtime}
    _emit(doc, args.out)
    if args.csv:
        rows = rep.rows()
        header = tuple(rows[0])
        report.write_csv(args.csv, header, [[r[h] for h in header] for r in rows])
    fig = _figure_path(args)
    if fig:
        plotting.plot_rates(rep, fig)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isoproj", description="Bayesian monotone regression by projection.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def outputs(p, csv=True):
        p.add_argument("--out", help="JSON output path (default: stdout)")
        if csv:
            p.add_argument("--csv", help="CSV table path; a PNG figure is written next to it")
            p.add_argument("--figure", help="explicit figure path")
            p.add_argument("--no-figure", action="store_true")
        p.add_argument("--timing", action="store_true", help="include wall-clock timings")

    p = sub.add_parser("fit", help="projection-posterior summary of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--prior", default="type1", choices=("type1", "type2", "type3"))
    p.add_argument("--J", default="auto")
    p.add_argument("--sigma", default="plugin")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metric", default=L2, choices=(L2, L1))
    p.add_argument("--weights", default="empirical", choices=("empirical", "uniform"))
    p.add_argument("--grid-size", type=int, default=101)
    p.add_argument("--alpha", type=float, default=0.05, help="band tail probability")
    p.add_argument("--keep-draws", action="store_true")
    outputs(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="Bayesian test of monotonicity")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", default="fixed", choices=("fixed", "adaptive"))
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--m0", default="1.0", help="number, or 'calibrate'")
    p.add_argument("--rate-constant", default=None)
    p.add_argument("--calibration-reps", type=int, default=50)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--sigma", default="plugin")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="size/power or separation study")
    p.add_argument("--config")
    _add_fields(p, {**SIM_FIELDS, **TEST_FIELDS})
    outputs(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rates", help="contraction-rate study")
    p.add_argument("--config")
    _add_fields(p, {**SIM_FIELDS, **RATE_FIELDS})
    outputs(p)
    p.set_defaults(func=cmd_rates)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_usage(sys.stderr)
            return 1
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"isoproj: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"isoproj: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"isoproj: {exc}", file=sys.stderr)
        return 1
    return 0


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
