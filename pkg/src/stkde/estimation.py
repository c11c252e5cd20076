"""Fitting the per-cell weight curves from demand-share autocorrelation.

Each cell's hourly demand share (its fraction of the citywide events) is a
cheap proxy for its demand density, so the share series' sample
autocorrelation captures how informative a lag-l-old observation is.  The
non-negative part of that autocorrelation is the curve the parametric weight
function is fitted to, cell by cell, with a free scale parameter eliminated
in closed form and the remaining four parameters found by multi-start
bounded Nelder-Mead.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .domain import EventStore, StudyRegion, cell_index
from .errors import DegenerateSeriesError, FitFailedError
from .weights import WeightModel, WeightParams, eval_raw_weight

MIN_PAIRS_PER_LAG = 30
MIN_INCLUDED_LAGS = 100


@dataclass(frozen=True)
class ShareSeries:
    """Hourly demand shares of one cell; NaN marks hours with no events at all."""

    cell: int
    values: np.ndarray
    start: int

    @property
    def n_periods(self):
        return self.values.size


@dataclass(frozen=True)
class AcfCurve:
    """Sample autocorrelation at lags 1..L with per-lag pair counts.

    ``included`` masks out lags whose pair count is too small to trust;
    excluded lags never participate in fitting.
    """

    cell: int
    values: np.ndarray
    pair_counts: np.ndarray
    included: np.ndarray

    @property
    def max_lag(self):
        return self.values.size

    def lags(self):
        return np.arange(1, self.max_lag + 1)


@dataclass(frozen=True)
class FitResult:
    """One cell's fitted parameters plus fit diagnostics."""

    params: WeightParams
    sse: float
    iterations: int
    fallback: bool = False


@dataclass(frozen=True)
class FitOptions:
    """Optimizer knobs; the defaults are the fixed, CLI-overridable ones."""

    starts: int = 16
    max_iter: int = 500
    xatol: float = 1e-5
    seed: int = 0
    min_events: int = 500
    threads: int = 1


def share_series(store: EventStore, region: StudyRegion, training_range) -> list[ShareSeries]:
    """Per-cell share series p_c(t) over [start, end); NaN where n_t = 0."""
    start, end = int(training_range[0]), int(training_range[1])
    if end <= start:
        raise ValueError("training range is empty")
    n_periods = end - start
    x, y, t = store.window(start, end)
    cells = cell_index(x, y, region) if x.size else np.zeros(0, dtype=np.int64)
    flat = (t - start) * region.n_cells + cells
    counts = np.bincount(flat, minlength=n_periods * region.n_cells).reshape(
        n_periods, region.n_cells).astype(np.float64)
    totals = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        shares = counts / totals[:, None]
    shares[totals == 0] = np.nan
    return [ShareSeries(c, np.ascontiguousarray(shares[:, c]), start)
            for c in range(region.n_cells)]


def sample_acf(series: ShareSeries, max_lag: int) -> AcfCurve:
    """Sample ACF with pairwise-complete numerators and a global denominator.

    The mean and the (biased) denominator use every non-missing value; the
    lag-l numerator sums over pairs (t, t+l) where both entries are present.
    Lags with fewer than MIN_PAIRS_PER_LAG complete pairs are flagged as
    excluded rather than dropped.
    """
    v = np.asarray(series.values, dtype=np.float64)
    if v.size < max_lag + 2:
        raise ValueError(f"series needs >= {max_lag + 2} periods, has {v.size}")
    present = np.isfinite(v)
    n_present = int(present.sum())
    if n_present == 0:
        raise DegenerateSeriesError(f"cell {series.cell}: series is entirely missing")
    if np.all(v[present] == v[present][0]):
        raise DegenerateSeriesError(f"cell {series.cell}: share series has zero variance")
    mean = v[present].mean()
    dev = np.where(present, v - mean, 0.0)
    denom = float(np.dot(dev, dev))
    if denom == 0.0:
        raise DegenerateSeriesError(f"cell {series.cell}: share series has zero variance")
    values = np.empty(max_lag)
    counts = np.empty(max_lag, dtype=np.int64)
    m = present.astype(np.float64)
    for lag in range(1, max_lag + 1):
        values[lag - 1] = np.dot(dev[:-lag], dev[lag:]) / denom
        counts[lag - 1] = int(np.dot(m[:-lag], m[lag:]))
    return AcfCurve(series.cell, values, counts, counts >= MIN_PAIRS_PER_LAG)


def positive_part(curve: AcfCurve) -> AcfCurve:
    """Element-wise clamp at zero; exclusion flags carry over unchanged."""
    return replace(curve, values=np.maximum(curve.values, 0.0))


def _curve_on_lags(rho, lags, t1, t2):
    """Raw weight values at the given lags for rho = (rho1..rho4)."""
    s1 = np.sin(np.pi * lags / t1) ** 2
    s2 = np.sin(np.pi * lags / t2) ** 2
    return (np.power(rho[0], lags)
            + np.power(rho[1], lags) * np.power(rho[2], s1) * np.power(rho[3], s2))


def _scaled_sse(rho, target, lags, t1, t2):
    """SSE after eliminating the free scale rho0 in closed form."""
    w = _curve_on_lags(rho, lags, t1, t2)
    ww = float(np.dot(w, w))
    if ww == 0.0:
        return float(np.dot(target, target)), 0.0
    rho0 = max(0.0, float(np.dot(target, w)) / ww)
    resid = target - rho0 * w
    return float(np.dot(resid, resid)), rho0


def fit_weight_params(curve: AcfCurve, t1: float = 24.0, t2: float = 168.0,
                      options: FitOptions = FitOptions()) -> FitResult:
    """Fit (rho0..rho4) to the non-negative ACF curve of one cell.

    Multi-start bounded Nelder-Mead over (rho1..rho4) in [0,1]^4 with rho0
    eliminated in closed form at every evaluation.  Best SSE wins; exact ties
    go to the larger rho1.  The unit-mass constraint on the curve is a pure
    rescale applied later by WeightModel, which the free rho0 makes
    SSE-neutral.
    """
    included = curve.included
    if int(included.sum()) < MIN_INCLUDED_LAGS:
        raise ValueError(
            f"cell {curve.cell}: needs >= {MIN_INCLUDED_LAGS} included lags, "
            f"has {int(included.sum())}")
    target = np.maximum(curve.values[included], 0.0)
    lags = curve.lags()[included].astype(np.float64)

    if not np.any(target > 0.0):
        # Flat-zero target: any admissible curve fits exactly with rho0 = 0;
        # resolve the tie deterministically at the rho1 = 1 corner.
        params = WeightParams(0.0, 1.0, 1.0, 1.0, 1.0, t1, t2)
        return FitResult(params, 0.0, 0, False)

    sobol = qmc.Sobol(d=4, scramble=True, seed=options.seed)
    starts = sobol.random(options.starts)
    best = None
    total_iters = 0
    for x0 in starts:
        res = minimize(
            lambda r: _scaled_sse(r, target, lags, t1, t2)[0],
            x0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * 4,
            options={"maxiter": options.max_iter, "xatol": options.xatol,
                     "fatol": 1e-14})
        total_iters += res.nit
        sse = float(res.fun)
        if not np.isfinite(sse):
            continue
        cand = (sse, -res.x[0], res.x)
        if best is None or cand[:2] < best[:2]:
            best = cand
    if best is None:
        raise FitFailedError(f"cell {curve.cell}: every optimizer start failed")
    sse, _, rho = best
    rho = np.clip(rho, 0.0, 1.0)
    _, rho0 = _scaled_sse(rho, target, lags, t1, t2)
    params = WeightParams(rho0, rho[0], rho[1], rho[2], rho[3], t1, t2)
    return FitResult(params, sse, total_iters, False)


def pooled_acf(curves: list[AcfCurve], event_counts, max_lag: int) -> AcfCurve:
    """Citywide fallback target: event-count-weighted mean of per-cell ACFs.

    A lag is included in the pool if any contributing cell includes it;
    unreliable per-cell lags simply do not contribute.
    """
    num = np.zeros(max_lag)
    den = np.zeros(max_lag)
    counts = np.zeros(max_lag, dtype=np.int64)
    for curve in curves:
        w = float(event_counts[curve.cell])
        mask = curve.included
        num[mask] += w * curve.values[mask]
        den[mask] += w
        counts[mask] += curve.pair_counts[mask]
    included = den > 0
    values = np.zeros(max_lag)
    values[included] = num[included] / den[included]
    return AcfCurve(-1, values, counts, included)


@dataclass
class FitDiagnostics:
    """Everything cmd_fit exports for inspection."""

    results: list[FitResult]
    acf_curves: dict[int, AcfCurve] = field(default_factory=dict)
    pooled_curve: AcfCurve | None = None
    event_counts: np.ndarray | None = None


def fit_all_cells(store: EventStore, region: StudyRegion, training_range,
                  max_lag: int = 672, options: FitOptions = FitOptions(),
                  interpolate: bool = False, threshold: float = 0.0,
                  t1: float = 24.0, t2: float = 168.0):
    """Fit every cell and assemble the normalized WeightModel.

    Cells with too few events, a degenerate share series, or too few
    reliable lags fall back to a fit of the pooled citywide ACF.  Per-cell
    fits are independent (deterministic per-cell seeds), so execution order
    never changes the result.
    """
    start, end = int(training_range[0]), int(training_range[1])
    span = end - start
    required = max_lag + 168
    if span < required:
        raise ValueError(
            f"training range covers {span} periods; needs >= {required} "
            f"(max lag {max_lag} + one week)")
    shares = share_series(store, region, (start, end))
    x, y, _ = store.window(start, end)
    cells = cell_index(x, y, region) if x.size else np.zeros(0, dtype=np.int64)
    event_counts = np.bincount(cells, minlength=region.n_cells)

    # Curves for every cell feed the citywide pool; a cell only fits its own
    # curve when it also has enough events and enough reliable lags.
    curves: dict[int, AcfCurve] = {}
    eligible: list[int] = []
    for c in range(region.n_cells):
        try:
            curve = sample_acf(shares[c], max_lag)
        except (DegenerateSeriesError, ValueError):
            continue
        if int(curve.included.sum()) < MIN_INCLUDED_LAGS:
            continue
        curves[c] = curve
        if event_counts[c] >= options.min_events:
            eligible.append(c)

    def fit_cell(c):
        cell_opts = replace(options, seed=_cell_seed(options.seed, c))
        return fit_weight_params(positive_part(curves[c]), t1, t2, options=cell_opts)

    if options.threads > 1 and len(eligible) > 1:
        with ThreadPoolExecutor(max_workers=options.threads) as pool:
            fitted = dict(zip(eligible, pool.map(fit_cell, eligible)))
    else:
        fitted = {c: fit_cell(c) for c in eligible}

    need_fallback = [c for c in range(region.n_cells) if c not in fitted]
    pooled_curve = None
    pooled_fit = None
    if need_fallback:
        if not curves:
            raise FitFailedError(
                "no cell produced a usable autocorrelation curve, so the "
                "citywide fallback is degenerate (a single-cell grid always "
                "is: its shares are identically 1)")
        pooled_curve = positive_part(
            pooled_acf(list(curves.values()), event_counts, max_lag))
        pool_opts = replace(options, seed=_cell_seed(options.seed, region.n_cells))
        pooled_fit = fit_weight_params(pooled_curve, t1, t2, options=pool_opts)

    results = []
    for c in range(region.n_cells):
        if c in fitted:
            results.append(fitted[c])
        else:
            results.append(replace(pooled_fit, fallback=True))
    model = WeightModel(region, [r.params for r in results], max_lag,
                        interpolate=interpolate, threshold=threshold)
    diag = FitDiagnostics(results, curves, pooled_curve, event_counts)
    return model, diag


def _cell_seed(seed: int, cell: int) -> int:
    return int(np.random.SeedSequence([seed, cell]).generate_state(1)[0])
