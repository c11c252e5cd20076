"""Command-line interface: simulate, fit, predict, evaluate.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical
failure.  STKDE_CONFIG provides the default --config path.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import load_run_config, load_scenario
from .domain import read_event_csv, write_event_csv
from .errors import ConfigError, DataError, NumericalError, StkdeError
from .estimation import fit_all_cells
from .evaluation import run_backtest
from .predictor import DensityModel, SavedModel, load_model, save_model, select_bandwidth
from .simulate import simulate


def _add_common(p):
    p.add_argument("--config", default=os.environ.get("STKDE_CONFIG"),
                   help="config file (default: $STKDE_CONFIG)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--threads", type=int, default=1, help="worker-thread cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stkde",
        description="Hourly spatial demand-density forecasting with "
                    "informativeness-weighted kernel density estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic demand events")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit bandwidth and per-cell weight curves")
    _add_common(p)
    p.add_argument("--events", required=True, help="event CSV (timestamp,x_km,y_km)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="export density grids for target hours")
    _add_common(p)
    p.add_argument("--events", required=True, help="event CSV (timestamp,x_km,y_km)")
    p.add_argument("--model", required=True, help="fitted model file")
    p.add_argument("--target", type=int, action="append", required=True,
                   help="target hour index (repeatable)")
    p.add_argument("--threshold", type=float, default=None,
                   help="override the omission threshold")
    p.add_argument("--interpolate", action="store_true", default=None,
                   help="blend weight curves bilinearly between cell centers")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="run a sliding-window backtest")
    _add_common(p)
    p.add_argument("--events", required=True, help="event CSV (timestamp,x_km,y_km)")
    p.add_argument("--threshold", type=float, default=None,
                   help="override the threshold-variant omission threshold")
    p.set_defaults(func=cmd_evaluate)

    return parser


def _require_config(args) -> str:
    if not args.config:
        raise ConfigError("no config file given (use --config or $STKDE_CONFIG)")
    return args.config


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    spec = load_scenario(_require_config(args))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    out = _outdir(args)
    result = simulate(spec)
    events_path = out / "events.csv"
    write_event_csv(events_path, result.store, epoch=0.0)
    with open(out / "events.csv.meta", "w") as fh:
        fh.write(f"horizon_hours = {spec.horizon}\n")
        fh.write(f"seed = {spec.seed}\n")
        fh.write(f"total_events = {len(result.store)}\n")
        fh.write(f"components = {len(spec.components)}\n")
        fh.write(f"rejection_rate = {result.rejection_rate:.6g}\n")
    print(f"simulated {len(result.store)} events over {spec.horizon} hours "
          f"-> {events_path} (rejection rate {result.rejection_rate:.3%})")
    return 0


def _load_events(args, cfg):
    store, report, epoch = read_event_csv(args.events, cfg.region, cfg.epoch)
    dropped = report.dropped_out_of_box + report.dropped_unparseable
    if dropped:
        print(f"ingested {report.accepted} events "
              f"({report.dropped_out_of_box} out of box, "
              f"{report.dropped_unparseable} unparseable)", file=sys.stderr)
    return store, epoch


def cmd_fit(args) -> int:
    cfg = load_run_config(_require_config(args))
    fit_opts = cfg.fit
    if args.seed is not None:
        fit_opts = replace(fit_opts, seed=args.seed)
    fit_opts = replace(fit_opts, threads=max(args.threads, 1))
    store, _ = _load_events(args, cfg)

    train = cfg.train_range or (store.first_period, store.last_period + 1)
    span = train[1] - train[0]
    required = cfg.max_lag + 168
    if span < required:
        raise DataError(
            f"training data covers {span} hours; fitting needs at least "
            f"{required} (max lag {cfg.max_lag} + one week)")

    bandwidth = cfg.bandwidth
    if bandwidth is None:
        x, y, _ = store.window(*train)
        bandwidth = select_bandwidth(x, y)

    weights, diag = fit_all_cells(store, cfg.region, train, cfg.max_lag, fit_opts,
                                  interpolate=cfg.interpolate, threshold=cfg.threshold,
                                  t1=cfg.t1, t2=cfg.t2)
    out = _outdir(args)
    model_path = out / "model.stkde"
    save_model(model_path, SavedModel(weights, cfg.kernel, bandwidth))

    with open(out / "fit.csv", "w", newline="\n") as fh:
        fh.write("cell,events,rho0,rho1,rho2,rho3,rho4,norm,sse,iterations,fallback\n")
        for c, res in enumerate(diag.results):
            p = res.params
            fh.write(f"{c},{int(diag.event_counts[c])},{p.rho0:.17g},{p.rho1:.17g},"
                     f"{p.rho2:.17g},{p.rho3:.17g},{p.rho4:.17g},"
                     f"{weights.norms[c]:.17g},{res.sse:.17g},{res.iterations},"
                     f"{int(res.fallback)}\n")
    with open(out / "acf.csv", "w", newline="\n") as fh:
        fh.write("cell,lag,acf,pairs,included\n")
        for c in sorted(diag.acf_curves):
            curve = diag.acf_curves[c]
            for i, lag in enumerate(curve.lags()):
                fh.write(f"{c},{lag},{curve.values[i]:.17g},"
                         f"{curve.pair_counts[i]},{int(curve.included[i])}\n")
    with open(out / "fit_summary.txt", "w", newline="\n") as fh:
        fh.write(f"cells: {cfg.region.rows} rows x {cfg.region.cols} cols "
                 f"over [{cfg.region.x_min}, {cfg.region.x_max}] x "
                 f"[{cfg.region.y_min}, {cfg.region.y_max}] km\n")
        fh.write(f"training hours: [{train[0]}, {train[1]})\n")
        fh.write(f"bandwidth: h11={bandwidth.h11:.6g} h12={bandwidth.h12:.6g} "
                 f"h22={bandwidth.h22:.6g} km^2\n")
        for c, res in enumerate(diag.results):
            p = res.params
            tag = " (citywide fallback)" if res.fallback else ""
            fh.write(f"cell {c}: rho1={p.rho1:.4f} rho2={p.rho2:.4f} "
                     f"rho3={p.rho3:.4f} rho4={p.rho4:.4f} sse={res.sse:.5g}{tag}\n")
    n_fallback = sum(r.fallback for r in diag.results)
    print(f"fitted {cfg.region.n_cells} cells ({n_fallback} citywide fallback) "
          f"-> {model_path}")
    return 0


def cmd_predict(args) -> int:
    cfg = load_run_config(_require_config(args))
    saved = load_model(args.model)
    weights = saved.weights
    if args.interpolate is not None or args.threshold is not None:
        weights = weights.with_policy(interpolate=args.interpolate,
                                      threshold=args.threshold)
    store, _ = _load_events(args, cfg)
    model = DensityModel(store, weights, saved.kernel, saved.bandwidth)
    out = _outdir(args)
    for target in args.target:
        t0 = time.perf_counter()
        grid = model.predict_grid(target, threads=max(args.threads, 1))
        elapsed = time.perf_counter() - t0
        path = out / f"grid_{target:06d}.csv"
        grid.write_csv(path)
        print(f"hour {target}: {grid.retained} events retained, "
              f"{grid.omitted} omitted, integral {grid.integral:.4f}, "
              f"{elapsed:.2f}s -> {path}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_run_config(_require_config(args))
    if cfg.plan is None:
        raise ConfigError("evaluate needs a [backtest] section in the config")
    plan = cfg.plan
    if args.seed is not None:
        plan = replace(plan, seed=args.seed)
    if args.threshold is not None:
        plan = replace(plan, threshold=args.threshold)
    plan = replace(plan, threads=max(args.threads, 1))
    store, _ = _load_events(args, cfg)
    report = run_backtest(store, cfg.region, plan)
    out = _outdir(args)
    report.write_csv(out / "report.csv")
    report.write_per_hour_csv(out / "per_hour.csv")
    report.write_timings_csv(out / "timings.csv")
    report.write_table(out / "table.txt")
    print(report.format_table(), end="")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except StkdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
