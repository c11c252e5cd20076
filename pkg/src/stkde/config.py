"""Flat key-value configuration files (INI sections) for the CLI.

One format family covers the run configuration, the backtest plan, and the
simulation scenario; unknown sections and keys are rejected so typos fail
loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from datetime import datetime, timezone

from .baselines import MedicConfig
from .domain import StudyRegion
from .errors import ConfigError
from .estimation import FitOptions
from .evaluation import BacktestPlan
from .predictor import DENSITY_FLOOR, Bandwidth, KernelKind
from .simulate import Component, ScenarioSpec, VolumeSpec

_RUN_SECTIONS = {"region", "data", "model", "fit", "medic", "backtest"}
_SCENARIO_SECTIONS = {"box", "volume", "simulate"}


@dataclass(frozen=True)
class RunConfig:
    """Everything the fit/predict/evaluate commands need beyond file paths."""

    region: StudyRegion
    epoch: float | None = None
    max_lag: int = 672
    t1: float = 24.0
    t2: float = 168.0
    kernel: KernelKind = KernelKind.GAUSSIAN
    bandwidth: Bandwidth | None = None
    interpolate: bool = False
    threshold: float = 0.0
    density_floor: float = DENSITY_FLOOR
    fit: FitOptions = FitOptions()
    medic: MedicConfig = MedicConfig()
    train_range: tuple[int, int] | None = None
    plan: BacktestPlan | None = None


def _parser():
    return configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                     interpolation=None)


def _read(path) -> configparser.ConfigParser:
    cp = _parser()
    try:
        with open(path, "r") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    return cp


def _check_keys(cp, section, allowed):
    extra = set(cp[section]) - set(allowed)
    if extra:
        raise ConfigError(f"[{section}] has unknown keys: {sorted(extra)}")


def _get(cp, section, key, conv, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(f"missing required key {key!r} in [{section}]")
        return default
    raw = cp.get(section, key)
    try:
        if conv is bool:
            return cp.getboolean(section, key)
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _parse_epoch(raw: str) -> float:
    try:
        return float(int(raw))
    except ValueError:
        pass
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ValueError(f"epoch must be epoch-seconds or ISO-8601: {exc}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def load_run_config(path) -> RunConfig:
    cp = _read(path)
    unknown = set(cp.sections()) - _RUN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if "region" not in cp:
        raise ConfigError("config needs a [region] section")

    _check_keys(cp, "region", {"x_min", "x_max", "y_min", "y_max", "grid_rows",
                               "grid_cols", "fine_cells_per_km"})
    x_min = _get(cp, "region", "x_min", float, required=True)
    x_max = _get(cp, "region", "x_max", float, required=True)
    y_min = _get(cp, "region", "y_min", float, required=True)
    y_max = _get(cp, "region", "y_max", float, required=True)
    fine = _get(cp, "region", "fine_cells_per_km", float, 1.0)
    rows = _get(cp, "region", "grid_rows", int)
    cols = _get(cp, "region", "grid_cols", int)
    try:
        if rows is None or cols is None:
            region = StudyRegion.with_default_grid(x_min, x_max, y_min, y_max, fine)
        else:
            region = StudyRegion(x_min, x_max, y_min, y_max, rows, cols, fine)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    cfg = RunConfig(region)
    if "data" in cp:
        _check_keys(cp, "data", {"epoch"})
        epoch = _get(cp, "data", "epoch", _parse_epoch)
        cfg = replace(cfg, epoch=epoch)

    if "model" in cp:
        _check_keys(cp, "model", {"max_lag", "daily_period", "weekly_period",
                                  "kernel", "bandwidth", "interpolate",
                                  "omission_threshold", "density_floor"})
        kernel_name = _get(cp, "model", "kernel", str, "gaussian")
        try:
            kernel = KernelKind(kernel_name.lower())
        except ValueError:
            raise ConfigError(f"unknown kernel {kernel_name!r}; use gaussian or "
                              f"epanechnikov") from None
        bw = None
        bw_raw = _get(cp, "model", "bandwidth", str, "auto")
        if bw_raw and bw_raw.lower() != "auto":
            parts = bw_raw.split()
            if len(parts) != 3:
                raise ConfigError("bandwidth must be 'auto' or 'h11 h12 h22'")
            try:
                bw = Bandwidth(float(parts[0]), float(parts[1]), float(parts[2]))
            except Exception as exc:
                raise ConfigError(f"invalid bandwidth override: {exc}") from exc
        cfg = replace(
            cfg,
            max_lag=_get(cp, "model", "max_lag", int, 672),
            t1=_get(cp, "model", "daily_period", float, 24.0),
            t2=_get(cp, "model", "weekly_period", float, 168.0),
            kernel=kernel,
            bandwidth=bw,
            interpolate=_get(cp, "model", "interpolate", bool, False),
            threshold=_get(cp, "model", "omission_threshold", float, 0.0),
            density_floor=_get(cp, "model", "density_floor", float, DENSITY_FLOOR),
        )

    if "fit" in cp:
        _check_keys(cp, "fit", {"min_events", "starts", "max_iter", "xatol",
                                "seed", "train_start", "train_end"})
        cfg = replace(cfg, fit=FitOptions(
            starts=_get(cp, "fit", "starts", int, 16),
            max_iter=_get(cp, "fit", "max_iter", int, 500),
            xatol=_get(cp, "fit", "xatol", float, 1e-5),
            seed=_get(cp, "fit", "seed", int, 0),
            min_events=_get(cp, "fit", "min_events", int, 500),
        ))
        train_start = _get(cp, "fit", "train_start", int)
        train_end = _get(cp, "fit", "train_end", int)
        if (train_start is None) != (train_end is None):
            raise ConfigError("[fit] needs both train_start and train_end or neither")
        if train_start is not None:
            cfg = replace(cfg, train_range=(train_start, train_end))

    if "medic" in cp:
        _check_keys(cp, "medic", {"cell_km", "lookback_weeks", "lookback_years",
                                  "anchor_x", "anchor_y"})
        try:
            medic = MedicConfig(
                cell_km=_get(cp, "medic", "cell_km", float, 1.0),
                lookback_weeks=_get(cp, "medic", "lookback_weeks", int, 4),
                lookback_years=_get(cp, "medic", "lookback_years", int, 2),
                anchor_x=_get(cp, "medic", "anchor_x", float, 0.0),
                anchor_y=_get(cp, "medic", "anchor_y", float, 0.0),
                density_floor=cfg.density_floor,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        cfg = replace(cfg, medic=medic)

    if "backtest" in cp:
        _check_keys(cp, "backtest", {"train_start", "train_end", "test_start",
                                     "test_end", "methods", "threshold",
                                     "threshold_retain", "seed", "threads"})
        methods_raw = _get(cp, "backtest", "methods", str, "")
        methods = tuple(m.strip() for m in methods_raw.split(",") if m.strip())
        try:
            plan = BacktestPlan(
                train=(_get(cp, "backtest", "train_start", int, required=True),
                       _get(cp, "backtest", "train_end", int, required=True)),
                test=(_get(cp, "backtest", "test_start", int, required=True),
                      _get(cp, "backtest", "test_end", int, required=True)),
                methods=methods,
                kernel=cfg.kernel,
                bandwidth=cfg.bandwidth,
                max_lag=cfg.max_lag,
                t1=cfg.t1,
                t2=cfg.t2,
                fit=cfg.fit,
                medic=cfg.medic,
                threshold=_get(cp, "backtest", "threshold", float),
                threshold_retain=_get(cp, "backtest", "threshold_retain", int, 200),
                seed=_get(cp, "backtest", "seed", int, cfg.fit.seed),
                density_floor=cfg.density_floor,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        cfg = replace(cfg, plan=plan)
    return cfg


def load_scenario(path) -> ScenarioSpec:
    cp = _read(path)
    sections = set(cp.sections())
    comp_sections = sorted(s for s in sections if s.startswith("component."))
    unknown = sections - _SCENARIO_SECTIONS - set(comp_sections)
    if unknown:
        raise ConfigError(f"unknown scenario sections: {sorted(unknown)}")
    for name in ("box", "volume", "simulate"):
        if name not in cp:
            raise ConfigError(f"scenario needs a [{name}] section")
    if not comp_sections:
        raise ConfigError("scenario needs at least one [component.N] section")

    _check_keys(cp, "box", {"x_min", "x_max", "y_min", "y_max"})
    _check_keys(cp, "volume", {"mean", "amplitude", "period", "phase"})
    _check_keys(cp, "simulate", {"horizon", "seed"})

    components = []
    for sec in comp_sections:
        _check_keys(cp, sec, {"center", "cov", "base", "daily_amp", "daily_phase",
                              "weekly_amp", "weekly_phase", "ar_phi", "ar_sigma"})
        center_raw = _get(cp, sec, "center", str, required=True).split()
        cov_raw = _get(cp, sec, "cov", str, required=True).split()
        if len(center_raw) != 2:
            raise ConfigError(f"[{sec}] center must be 'x y'")
        if len(cov_raw) != 3:
            raise ConfigError(f"[{sec}] cov must be 'c11 c12 c22'")
        components.append(Component(
            center=(float(center_raw[0]), float(center_raw[1])),
            cov=(float(cov_raw[0]), float(cov_raw[1]), float(cov_raw[2])),
            base=_get(cp, sec, "base", float, 0.0),
            daily_amp=_get(cp, sec, "daily_amp", float, 0.0),
            daily_phase=_get(cp, sec, "daily_phase", float, 0.0),
            weekly_amp=_get(cp, sec, "weekly_amp", float, 0.0),
            weekly_phase=_get(cp, sec, "weekly_phase", float, 0.0),
            ar_phi=_get(cp, sec, "ar_phi", float, 0.0),
            ar_sigma=_get(cp, sec, "ar_sigma", float, 0.0),
        ))

    spec = ScenarioSpec(
        x_min=_get(cp, "box", "x_min", float, required=True),
        x_max=_get(cp, "box", "x_max", float, required=True),
        y_min=_get(cp, "box", "y_min", float, required=True),
        y_max=_get(cp, "box", "y_max", float, required=True),
        components=tuple(components),
        volume=VolumeSpec(
            mean=_get(cp, "volume", "mean", float, required=True),
            amplitude=_get(cp, "volume", "amplitude", float, 0.0),
            period=_get(cp, "volume", "period", float, 24.0),
            phase=_get(cp, "volume", "phase", float, 0.0),
        ),
        horizon=_get(cp, "simulate", "horizon", int, required=True),
        seed=_get(cp, "simulate", "seed", int, 0),
    )
    try:
        spec.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return spec
