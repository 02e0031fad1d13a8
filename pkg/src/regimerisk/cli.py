"""
Command-line interface.

::

    regimerisk calibrate --config run.json --out model.json
    regimerisk filter    --model model.json --data DAX=dax.csv REX=rex.csv --out post.csv
    regimerisk risk      --model model.json --config run.json --asset DAX --out risk.csv
    regimerisk backtest  --model model.json --config run.json --asset DAX --split 2011-01-04
    regimerisk simulate  --model model.json --steps 4000 --seed 7 --out-dir sim/

Price data come either from ``--data NAME=PATH ...`` or from the
``prices`` table of a run configuration (JSON). Every command exits with
status 1 on a data, model or numerical error and 2 on a usage error.
"""

import argparse
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import DEFAULT_LEVEL, DEFAULT_WINDOW, backtest, backtest_simple, risk_series
from .calibration import CalibrationConfig, calibrate
from .data import dumps_json, ingest, load_model, save_model, write_prices, write_report, write_table
from .errors import DataError, RegimeRiskError
from .fourier import InversionConfig
from .regime import Posterior, filter_series, simulate

log = logging.getLogger("regimerisk")


@dataclass(frozen=True)
class RunConfig:
    """
    Pipeline configuration.

    ``prices`` maps market names to ``date,close`` files (relative paths
    are taken relative to the configuration file). Windows are inclusive
    ``[first, last]`` ISO dates; ``None`` leaves a side open.
    """

    prices: dict
    calibration_window: tuple = (None, None)
    out_of_sample_window: tuple = (None, None)
    level: float = DEFAULT_LEVEL
    horizon: int = 1
    inversion: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    seed: int = 0
    burn_in: int = 0

    def __post_init__(self):
        if not self.prices:
            raise DataError("run configuration lists no price files")
        if not 0.0 < self.level < 1.0:
            raise DataError(f"level must lie in (0, 1), got {self.level}")
        if int(self.horizon) < 1:
            raise DataError(f"horizon must be >= 1, got {self.horizon}")
        for name, win in (("calibration_window", self.calibration_window),
                          ("out_of_sample_window", self.out_of_sample_window)):
            if len(win) != 2:
                raise DataError(f"{name} must be [first, last]")
            if win[0] is not None and win[1] is not None and _day(win[0]) > _day(win[1]):
                raise DataError(f"{name} is reversed: {win}")
        cal_end, oos_start = self.calibration_window[1], self.out_of_sample_window[0]
        if cal_end is not None and oos_start is not None and not _day(cal_end) < _day(oos_start):
            raise DataError("out-of-sample window must start after the calibration window ends")

    @property
    def names(self):
        return tuple(self.prices)

    def inversion_config(self):
        return InversionConfig(**self.inversion) if self.inversion else None

    def calibration_config(self):
        opts = {"seed": self.seed, **self.calibration}
        return CalibrationConfig(**opts)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["calibration_window"] = list(self.calibration_window)
        d["out_of_sample_window"] = list(self.out_of_sample_window)
        return d


def _day(s):
    return np.datetime64(s, "D")


def load_config(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise DataError(f"{path}: configuration must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise DataError(f"{path}: unknown configuration keys {sorted(unknown)}")
    if "prices" not in raw or not isinstance(raw["prices"], dict):
        raise DataError(f"{path}: 'prices' must map market names to files")
    prices = {str(k): str((path.parent / v) if not Path(v).is_absolute() else v)
              for k, v in raw["prices"].items()}
    opts = {k: v for k, v in raw.items() if k != "prices"}
    for key in ("calibration_window", "out_of_sample_window"):
        if key in opts:
            opts[key] = tuple(opts[key])
    try:
        return RunConfig(prices=prices, **opts)
    except TypeError as exc:
        raise DataError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# helpers


def _parse_sources(items):
    sources = {}
    for item in items:
        if "=" in item:
            name, path = item.split("=", 1)
        else:
            name, path = Path(item).stem, item
        if name in sources:
            raise DataError(f"market {name!r} given twice")
        sources[name] = path
    return sources


def _load_panel(args, cfg=None):
    if args.data:
        sources = _parse_sources(args.data)
    elif cfg is not None:
        sources = cfg.prices
    else:
        raise DataError("no price data: pass --data NAME=PATH ... or --config")
    result = ingest(sources)
    if result.dropped:
        log.info("dropped %d non-common dates", result.dropped)
    return result


def _maybe_config(args):
    return load_config(args.config) if getattr(args, "config", None) else None


def _window(panel, window):
    first, last = window
    return panel.between(first, last)


def _inversion(args, cfg):
    opts = dict(cfg.inversion) if cfg else {}
    if getattr(args, "grid_size", None):
        opts["grid_size"] = args.grid_size
    if getattr(args, "damping", None):
        opts["damping"] = args.damping
    return InversionConfig(**opts) if opts else None


def _num(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else x


# ---------------------------------------------------------------------------
# commands


def cmd_calibrate(args):
    cfg = load_config(args.config)
    ingested = _load_panel(args, cfg)
    panel = _window(ingested.panel, cfg.calibration_window)
    if len(panel) == 0:
        raise DataError("calibration window contains no dates")
    ccfg = cfg.calibration_config()
    if args.restarts:
        ccfg = dataclasses.replace(ccfg, restarts=args.restarts)
    if args.max_iterations:
        ccfg = dataclasses.replace(ccfg, max_iterations=args.max_iterations)
    result = calibrate(panel, ccfg)
    diagnostics = {
        "objective": result.objective,
        "log_likelihood": result.log_likelihood,
        "penalty": result.penalty,
        "penalty_weight": result.penalty_weight,
        "penalty_lags": ccfg.penalty_lags,
        "converged": result.converged,
        "evaluations": result.evaluations,
        "observations": len(panel),
        "first_date": str(panel.dates[0]),
        "last_date": str(panel.dates[-1]),
        "dropped_dates": ingested.dropped,
        "starts": result.starts,
    }
    save_model(args.out, result.model, diagnostics)
    if args.trace:
        ev, val = zip(*result.trace) if result.trace else ((), ())
        write_table(args.trace, ["evaluation", "objective"], [list(ev), [float(v) for v in val]])
    print(f"calibrated {len(panel)} dates, objective {result.objective:.6f}, "
          f"converged={result.converged}; model written to {args.out}")
    return 0


def cmd_filter(args):
    model = load_model(args.model)
    cfg = _maybe_config(args)
    panel = _load_panel(args, cfg).panel.select(model.names)
    series = filter_series(model, panel)
    write_table(args.out, ["date", "p_state1", "p_state2"],
                [[str(d) for d in series.dates], series.probs[:, 0], series.probs[:, 1]])
    print(f"filtered {len(series)} dates -> {args.out}")
    return 0


def _posterior_arg(value):
    if value is None:
        return None
    p1 = float(value)
    if not 0.0 <= p1 <= 1.0:
        raise DataError(f"--posterior must lie in [0, 1], got {value}")
    return Posterior(p1, 1.0 - p1)


def cmd_risk(args):
    model = load_model(args.model)
    cfg = _maybe_config(args)
    panel = _load_panel(args, cfg).panel.select(model.names)
    level = args.level if args.level is not None else (cfg.level if cfg else DEFAULT_LEVEL)
    horizon = args.horizon if args.horizon is not None else (cfg.horizon if cfg else 1)
    report = risk_series(model, panel, args.asset, level, horizon, _inversion(args, cfg),
                         posterior=_posterior_arg(args.posterior), normalization=args.es_normalization)
    write_table(args.out, ["date", "return", "VaR", "ES", "posterior_state1"],
                [[str(d) for d in report.dates], report.returns, report.var, report.es,
                 report.posterior_state1])
    print(f"{len(report)} forecasts of {report.asset} at level {level} -> {args.out}")
    return 0


def _report_lines(prefix, rep):
    return {
        f"{prefix}.model": rep.model,
        f"{prefix}.first_date": rep.first_date or "-",
        f"{prefix}.last_date": rep.last_date or "-",
        f"{prefix}.n": rep.n,
        f"{prefix}.breaches": rep.breaches,
        f"{prefix}.breach_rate": _num(rep.breach_rate),
        f"{prefix}.binomial_pvalue": _num(rep.binomial_pvalue),
        f"{prefix}.runs_pvalue": _num(rep.runs_pvalue),
    }


def cmd_backtest(args):
    model = load_model(args.model)
    cfg = _maybe_config(args)
    panel = _load_panel(args, cfg).panel.select(model.names)
    level = args.level if args.level is not None else (cfg.level if cfg else DEFAULT_LEVEL)
    burn_in = args.burn_in if args.burn_in is not None else (cfg.burn_in if cfg else 0)
    split = args.split
    if split is not None and split.strip().isdigit():
        split = int(split)
    in_sample_last = None
    if cfg is not None:
        if split is None:
            split = cfg.out_of_sample_window[0]
        in_sample_last = cfg.calibration_window[1]
        # filter from the calibration start through the out-of-sample end
        panel = panel.between(cfg.calibration_window[0], cfg.out_of_sample_window[1])
    inv = _inversion(args, cfg)
    result = backtest(model, panel, args.asset, level, split, burn_in, inv, two_sided=args.two_sided,
                      normalization=args.es_normalization, in_sample_last=in_sample_last)
    out = {"asset": model.asset(args.asset).name, "level": level, "split": str(split),
           "burn_in": burn_in, "test": "kupiec-lr" if args.two_sided else "binomial-upper"}
    ins = result.in_sample
    out.update(_report_lines("in_sample", ins))
    out.update(_report_lines("out_of_sample", result.out_of_sample))
    if args.baseline == "simple":
        base = backtest_simple(panel, args.asset, level, split, args.window, burn_in, inv, args.two_sided,
                               in_sample_last=in_sample_last)
        out.update(_report_lines("baseline.in_sample", base.in_sample))
        out.update(_report_lines("baseline.out_of_sample", base.out_of_sample))
        out["baseline.failed_windows"] = int(base.extra["forecast"].failed.sum())
    if args.out:
        write_report(args.out, out)
    else:
        for k, v in out.items():
            print(f"{k} = {v}")
    if args.table:
        cols = ["date", "return", "VaR", "ES", "posterior_state1"]
        fc = result.forecasts
        data = [[str(d) for d in fc.dates], fc.returns, fc.var, fc.es, fc.posterior_state1]
        if args.baseline == "simple":
            cols.append("VaR_simple")
            data.append(base.extra["var"])
        write_table(args.table, cols, data)
    return 0


def cmd_simulate(args):
    model = load_model(args.model)
    states, panel = simulate(model, args.steps, args.seed, args.start)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    first = np.busday_offset(panel.dates[0], -1, roll="backward")
    price_dates = np.concatenate([[first], panel.dates])
    prices = {}
    for j, name in enumerate(panel.names):
        closes = args.initial_price * np.exp(np.concatenate([[0.0], np.cumsum(panel.values[:, j])]))
        fname = f"{name}.csv"
        write_prices(outdir / fname, price_dates, closes)
        prices[name] = fname
    write_table(outdir / "states.csv", ["date", "state"], [[str(d) for d in panel.dates], states])
    config = {"prices": prices, "calibration_window": [str(panel.dates[0]), str(panel.dates[-1])],
              "out_of_sample_window": [None, None], "level": DEFAULT_LEVEL, "horizon": 1,
              "seed": args.seed if args.seed is not None else 0}
    (outdir / "config.json").write_text(dumps_json(config))
    print(f"simulated {args.steps} steps of {len(panel.names)} markets -> {outdir}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="regimerisk", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def data_opts(sp, config_required=False):
        sp.add_argument("--config", required=config_required, help="run configuration (JSON)")
        sp.add_argument("--data", nargs="+", metavar="NAME=PATH",
                        help="price files; overrides the configuration's 'prices'")

    def inversion_opts(sp):
        sp.add_argument("--grid-size", type=int, help="FFT length (power of two)")
        sp.add_argument("--damping", type=float, help="inversion contour shift (> 0)")
        sp.add_argument("--es-normalization", choices=("tail", "paper"), default="tail",
                        help="divide the tail integral by the tail probability (default) "
                             "or by the confidence level")

    sp = sub.add_parser("calibrate", help="fit a regime model to the calibration window")
    data_opts(sp, config_required=True)
    sp.add_argument("--out", required=True, help="model file to write")
    sp.add_argument("--trace", help="optional CSV of the objective trace")
    sp.add_argument("--restarts", type=int, help="override the number of starts")
    sp.add_argument("--max-iterations", type=int, help="override the polishing budget")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("filter", help="posterior state probabilities per date")
    sp.add_argument("--model", required=True)
    data_opts(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_filter)

    sp = sub.add_parser("risk", help="per-date VaR and ES forecasts")
    sp.add_argument("--model", required=True)
    data_opts(sp)
    sp.add_argument("--asset", required=True)
    sp.add_argument("--level", type=float, help="confidence level (default 0.95)")
    sp.add_argument("--horizon", type=int, help="holding period in days (default 1)")
    sp.add_argument("--posterior", help="force P(state 1) on every date instead of filtering")
    inversion_opts(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_risk)

    sp = sub.add_parser("backtest", help="breach counts and test p-values")
    sp.add_argument("--model", required=True)
    data_opts(sp)
    sp.add_argument("--asset", required=True)
    sp.add_argument("--split", help="first out-of-sample date (ISO) or row index")
    sp.add_argument("--level", type=float)
    sp.add_argument("--burn-in", type=int)
    sp.add_argument("--baseline", choices=("none", "simple"), default="none",
                    help="'simple' adds the rolling single-GHYP comparison")
    sp.add_argument("--window", type=int, default=DEFAULT_WINDOW, help="baseline look-back")
    sp.add_argument("--two-sided", action="store_true", help="Kupiec likelihood-ratio p-values")
    inversion_opts(sp)
    sp.add_argument("--out", help="report file (key = value); stdout when omitted")
    sp.add_argument("--table", help="optional CSV of the forecast series")
    sp.set_defaults(func=cmd_backtest)

    sp = sub.add_parser("simulate", help="synthetic prices and hidden states from a model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--start", default="2000-01-03", help="first return date")
    sp.add_argument("--initial-price", type=float, default=100.0)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RegimeRiskError, OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"regimerisk {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
