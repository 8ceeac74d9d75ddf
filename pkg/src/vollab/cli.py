"""Command-line interface: ``vollab {price,calibrate,forecast,compare}``.

Exit codes: 0 success, 2 usage or input error, 3 numeric or calibration
failure.
"""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import __version__
from .calibration import (
    MERTON_BOUNDS,
    MERTON_INIT,
    HESTON_BOUNDS,
    calibrate_heston,
    calibrate_merton,
    dump_params,
    load_params,
    params_document,
)
from .errors import CalibrationError, DomainError, NumericError, ParseError, ValidationError, VollabError
from .estimators import GarchVolatility, forecast_prices, price_snapshot
from .market_data import (
    DAY_COUNTS,
    DEFAULT_RISK_FREE_RATE,
    DEFAULT_VARIANCE_WINDOW,
    load_history,
    load_snapshot,
    log_returns,
    resolve_path,
)
from .optimize import Bounds
from .paths import GbmParams, HestonParams, MertonJumpParams, SimulationConfig
from .report import (
    ComparisonReport,
    read_report_csv,
    render_forecast_table,
    render_table,
    write_plot_data,
    write_report_csv,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

DEFAULT_PATHS = 10_000
DEFAULT_STEPS = 100

log = logging.getLogger("vollab")


class _JumpParams:
    """Jump parameters without a diffusion volatility (taken per contract)."""

    def __init__(self, lambda_j, mu_j, sigma_j, compensated=True):
        MertonJumpParams(0.0, lambda_j, mu_j, sigma_j, compensated)
        self.lambda_j = float(lambda_j)
        self.mu_j = float(mu_j)
        self.sigma_j = float(sigma_j)
        self.compensated = bool(compensated)


def _add_sim_flags(p):
    g = p.add_argument_group("simulation")
    g.add_argument("--seed", type=int, default=0, help="64-bit seed for every random stream (default 0)")
    g.add_argument("--paths", type=int, default=DEFAULT_PATHS, help="Monte Carlo paths (default 10000)")
    g.add_argument("--steps", type=int, default=None, help="time steps per path (default 100; heston 1000)")
    g.add_argument("--rate", type=float, default=None,
                   help=f"risk-free rate override (snapshot value otherwise; fallback {DEFAULT_RISK_FREE_RATE})")
    g.add_argument("--day-count", default="ACT/365", choices=sorted(DAY_COUNTS))
    g.add_argument("--jobs", type=int, default=1, help="worker threads for path generation")


def _add_model_param_flags(p):
    g = p.add_argument_group("model parameters")
    g.add_argument("--params", help="parameter document written by `vollab calibrate`")
    g.add_argument("--sigma", type=float, help="gbm: constant volatility instead of per-contract IV")
    g.add_argument("--lambda-j", type=float)
    g.add_argument("--mu-j", type=float)
    g.add_argument("--sigma-j", type=float)
    g.add_argument("--uncompensated", action="store_true", help="merton: drop the jump drift compensator")
    g.add_argument("--kappa", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--sigma-v", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--v0", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="vollab", description="Monte Carlo option pricing and calibration")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price a snapshot under one model and compare with market")
    p.add_argument("snapshot")
    p.add_argument("--model", choices=("gbm", "merton", "heston"), default="gbm")
    _add_model_param_flags(p)
    p.add_argument("--out", help="write the report CSV here")
    p.add_argument("--plot-data", help="write plot-ready CSV here")
    p.add_argument("--dump-paths", help="write the first contract's path grid CSV here")
    _add_sim_flags(p)

    p = sub.add_parser("calibrate", help="calibrate merton (to a snapshot) or heston (to a history)")
    p.add_argument("--model", choices=("merton", "heston"), required=True)
    p.add_argument("--snapshot", help="option-chain snapshot JSON")
    p.add_argument("--history", help="price history CSV (heston)")
    p.add_argument("--iv", type=float, help="heston: implied volatility for v0 (default: contract nearest the money)")
    p.add_argument("--window", type=int, default=DEFAULT_VARIANCE_WINDOW, help="heston: realized-variance window")
    p.add_argument("--init", type=float, nargs="+", help="initial point (merton: lambda mu sigma_j; heston: kappa theta)")
    for name in ("lambda", "mu", "sigma-j", "kappa", "theta"):
        p.add_argument(f"--{name}-bounds", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--uncompensated", action="store_true")
    p.add_argument("--out", help="write the parameter document here (stdout otherwise)")
    _add_sim_flags(p)

    p = sub.add_parser("forecast", help="GARCH-driven option prices for the next days")
    p.add_argument("snapshot")
    p.add_argument("history")
    p.add_argument("--days", type=int, default=3)
    p.add_argument("--out", help="write strike x day CSV here")
    _add_sim_flags(p)

    p = sub.add_parser("compare", help="model-versus-market table for several models")
    p.add_argument("snapshot", nargs="?")
    p.add_argument("--model", dest="models", action="append", default=[],
                   help="MODEL or MODEL=PARAMS.json; repeatable")
    p.add_argument("--replay", help="re-read a recorded report CSV instead of simulating")
    p.add_argument("--out", help="write the report CSV here")
    p.add_argument("--plot-data", help="write plot-ready CSV here")
    _add_sim_flags(p)
    return parser


def _snapshot(args):
    snap = load_snapshot(args.snapshot)
    if args.rate is not None:
        snap = snap.with_rate(args.rate)
    return snap


def _sim(args, model=None):
    steps = args.steps if args.steps is not None else (1000 if model == "heston" else DEFAULT_STEPS)
    return SimulationConfig(args.paths, steps, 1.0, args.seed)


def _params_from_doc(model, body):
    if model == "gbm":
        return GbmParams(float(body["sigma"]))
    if model == "merton":
        return _JumpParams(body["lambda_j"], body["mu_j"], body["sigma_j"], body.get("compensated", True))
    return HestonParams(*(float(body[k]) for k in ("kappa", "theta", "sigma_v", "rho", "v0")))


def _model_params(args, model):
    if args.params:
        doc_model, body, _ = load_params(resolve_path(args.params))
        if doc_model != model:
            raise DomainError(f"parameter document is for {doc_model!r}, not {model!r}")
        return _params_from_doc(model, body)
    if model == "gbm":
        return None if args.sigma is None else GbmParams(args.sigma)
    if model == "merton":
        values = (args.lambda_j, args.mu_j, args.sigma_j)
        if any(v is None for v in values):
            raise DomainError("merton needs --params or all of --lambda-j --mu-j --sigma-j")
        return _JumpParams(*values, compensated=not args.uncompensated)
    values = (args.kappa, args.theta, args.sigma_v, args.rho, args.v0)
    if any(v is None for v in values):
        raise DomainError("heston needs --params or all of --kappa --theta --sigma-v --rho --v0")
    return HestonParams(*values)


def _report(snapshot, columns, title):
    return ComparisonReport(tuple(snapshot.strikes), columns, tuple(snapshot.market_prices), title)


def _emit(report, args, out):
    out.write(render_table(report))
    if getattr(args, "out", None):
        write_report_csv(report, args.out)
    if getattr(args, "plot_data", None):
        write_plot_data(report, args.plot_data)


def cmd_price(args, out):
    snap = _snapshot(args)
    params = _model_params(args, args.model)
    sim = _sim(args, args.model)
    estimates = price_snapshot(snap, args.model, params, sim, args.day_count, args.jobs)
    report = _report(snap, {args.model: [e.price for e in estimates]},
                     f"{snap.symbol} {snap.as_of.isoformat()}  model={args.model}  paths={sim.n_paths} seed={sim.seed}")
    _emit(report, args, out)
    if args.dump_paths:
        _dump_first_grid(snap, args.model, params, sim, args)
    return EXIT_OK


def _dump_first_grid(snap, model, params, sim, args):
    from .market_data import time_to_expiry
    from .paths import simulate_gbm, simulate_heston, simulate_merton, write_path_csv

    c = snap.contracts[0]
    T = time_to_expiry(c.expiration, snap.as_of, args.day_count) or sim.dt
    cfg = SimulationConfig(sim.n_paths, sim.n_steps, T, sim.seed, snap.risk_free_rate)
    if model == "gbm":
        grid = simulate_gbm(snap.spot, params or GbmParams(c.implied_volatility), cfg, args.jobs)
    elif model == "merton":
        grid = simulate_merton(snap.spot, MertonJumpParams(c.implied_volatility, params.lambda_j, params.mu_j,
                                                          params.sigma_j, params.compensated), cfg, args.jobs)
    else:
        grid, _ = simulate_heston(snap.spot, params, cfg, args.jobs)
    write_path_csv(grid, args.dump_paths)


def _bounds_arg(args, names, default):
    lo = default.lower.copy()
    hi = default.upper.copy()
    for i, name in enumerate(names):
        pair = getattr(args, f"{name}_bounds")
        if pair is not None:
            lo[i], hi[i] = pair
    return Bounds(lo, hi)


def cmd_calibrate(args, out):
    if args.model == "merton":
        if not args.snapshot:
            raise DomainError("merton calibration needs --snapshot")
        snap = _snapshot(args)
        bounds = _bounds_arg(args, ("lambda", "mu", "sigma_j"), MERTON_BOUNDS)
        init = tuple(args.init) if args.init else MERTON_INIT
        if len(init) != 3:
            raise DomainError("merton --init takes three values: lambda mu sigma_j")
        sim = _sim(args, "merton")
        cal = calibrate_merton(snap, init=init, bounds=bounds, sim=sim, compensated=not args.uncompensated,
                               day_count=args.day_count, max_iter=args.max_iter or 100, n_workers=args.jobs)
        doc = params_document("merton", cal, args.seed, cal.objective, snap.as_of)
        iterations = cal.result.iterations
        objective = cal.objective
    else:
        if not args.history:
            raise DomainError("heston calibration needs --history")
        history = load_history(args.history)
        iv = args.iv
        as_of = history.dates[-1]
        if iv is None:
            if not args.snapshot:
                raise DomainError("heston calibration needs --iv or --snapshot")
            snap = _snapshot(args)
            atm = min(snap.contracts, key=lambda c: abs(c.strike - snap.spot))
            iv = atm.implied_volatility
            as_of = snap.as_of
        bounds = _bounds_arg(args, ("kappa", "theta"), HESTON_BOUNDS)
        init = tuple(args.init) if args.init else None
        if init is not None and len(init) != 2:
            raise DomainError("heston --init takes two values: kappa theta")
        params, result = calibrate_heston(history, iv, init=init, window=args.window, bounds=bounds,
                                          return_result=True)
        doc = params_document("heston", params, args.seed, result.f_star, as_of)
        iterations = result.iterations
        objective = result.f_star
    text = dump_params(doc)
    summary = f"model={args.model} objective={objective:.10g} iterations={iterations}\n"
    if args.out:
        dump_params(doc, args.out)
        out.write(summary)
    else:
        out.write(text)
        sys.stderr.write(summary)
    return EXIT_OK


def cmd_forecast(args, out):
    if args.days < 1:
        raise DomainError(f"--days must be >= 1, got {args.days}")
    snap = _snapshot(args)
    history = load_history(args.history)
    returns = log_returns(history)
    sim = _sim(args, "gbm")
    garch = GarchVolatility().fit(returns)
    dates, prices, vols = forecast_prices(snap, returns, args.days, sim, args.day_count, args.jobs, garch=garch)
    p = garch.params_
    title = (f"{snap.symbol} forecast from {snap.as_of.isoformat()}  "
             f"GARCH(1,1) alpha0={p.alpha0:.4g} alpha1={p.alpha1:.4f} beta1={p.beta1:.4f}\n"
             f"annualized vol: " + " ".join(f"{d.isoformat()}={v:.4f}" for d, v in zip(dates, vols)))
    out.write(render_forecast_table(snap.strikes, dates, prices, title))
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["strike", *(d.isoformat() for d in dates)])
            for k, row in zip(snap.strikes, prices):
                writer.writerow([repr(float(k)), *(repr(float(x)) for x in row)])
    return EXIT_OK


def _parse_model_spec(spec):
    name, _, path = spec.partition("=")
    if name not in ("gbm", "merton", "heston"):
        raise DomainError(f"unknown model {name!r} in --model {spec!r}")
    return name, path or None


def cmd_compare(args, out):
    if args.replay:
        report = read_report_csv(resolve_path(args.replay), title=f"replay of {args.replay}")
        _emit(report, args, out)
        return EXIT_OK
    if not args.snapshot:
        raise DomainError("compare needs a snapshot or --replay")
    if not args.models:
        raise DomainError("compare needs at least one --model")
    snap = _snapshot(args)
    columns = {}
    for spec in args.models:
        name, path = _parse_model_spec(spec)
        if path:
            doc_model, body, _ = load_params(resolve_path(path))
            if doc_model != name:
                raise DomainError(f"{path} holds {doc_model!r} parameters, not {name!r}")
            params = _params_from_doc(name, body)
        elif name == "gbm":
            params = None
        else:
            raise DomainError(f"--model {name} needs a parameter document: {name}=PARAMS.json")
        estimates = price_snapshot(snap, name, params, _sim(args, name), args.day_count, args.jobs)
        columns[name] = [e.price for e in estimates]
    report = _report(snap, columns, f"{snap.symbol} {snap.as_of.isoformat()}  paths={args.paths} seed={args.seed}")
    _emit(report, args, out)
    return EXIT_OK


COMMANDS = {"price": cmd_price, "calibrate": cmd_calibrate, "forecast": cmd_forecast, "compare": cmd_compare}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.paths < 1 or (args.steps is not None and args.steps < 1) or args.jobs < 1:
        parser.error("--paths, --steps and --jobs must be positive")
    if not 0 <= args.seed < 2**64:
        parser.error("--seed must be a 64-bit unsigned integer")
    try:
        return COMMANDS[args.command](args, out)
    except (CalibrationError, NumericError) as exc:
        last = getattr(exc, "last_iterate", None)
        msg = f"vollab: numeric failure: {exc}"
        if last is not None:
            msg += f" (last iterate {np.asarray(last).tolist()})"
        print(msg, file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, ValidationError, DomainError, VollabError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"vollab: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
