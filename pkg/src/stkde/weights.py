"""Informativeness weights for historical observations.

Each coarse spatial cell carries a parametric temporal weight curve built
from a short-term geometric decay plus damped daily and weekly seasonal
factors.  Curves are normalized to unit mass over the sliding window so that
weights are comparable across cells; prediction can either use the curve of
the containing cell or blend the four nearest cell centers bilinearly, and an
omission threshold can zero out (and thereby drop) weakly-informative events.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import Event, EventStore, StudyRegion, cell_index
from .errors import LagRangeError

DAILY_PERIOD = 24.0
WEEKLY_PERIOD = 168.0


@dataclass(frozen=True)
class WeightParams:
    """Fitted temporal signature of one cell.

    ``rho0`` is the curve-matching scale from fitting; it plays no role in
    prediction weights.  ``rho1`` is short-term serial dependence, ``rho3``
    and ``rho4`` daily and weekly seasonality, ``rho2`` the seasonal
    discount.  All of rho1..rho4 live in [0, 1].
    """

    rho0: float
    rho1: float
    rho2: float
    rho3: float
    rho4: float
    t1: float = DAILY_PERIOD
    t2: float = WEEKLY_PERIOD

    def __post_init__(self):
        if self.rho0 < 0:
            raise ValueError("rho0 must be >= 0")
        for name in ("rho1", "rho2", "rho3", "rho4"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("periods T1, T2 must be positive")


def eval_raw_weight(params: WeightParams, lag):
    """Unnormalized weight at integer lag(s) >= 0; always in [0, 2].

    Computes rho1^lag + rho2^lag * rho3^sin2(pi lag/T1) * rho4^sin2(pi lag/T2)
    with the 0^0 = 1 convention, so every curve starts at exactly 2.
    """
    lag_arr = np.asarray(lag, dtype=np.float64)
    if np.any(lag_arr < 0):
        raise ValueError("lag must be >= 0")
    s1 = np.sin(np.pi * lag_arr / params.t1) ** 2
    s2 = np.sin(np.pi * lag_arr / params.t2) ** 2
    w = (np.power(params.rho1, lag_arr)
         + np.power(params.rho2, lag_arr)
         * np.power(params.rho3, s1)
         * np.power(params.rho4, s2))
    return w if w.ndim else float(w)


class WeightModel:
    """Per-cell normalized weight curves plus the prediction-time policy.

    The normalized table has one row per cell with unit mass over lags
    1..L; ``interpolate`` and ``threshold`` control how per-event weights
    are produced from it.  Immutable after construction.
    """

    def __init__(self, region: StudyRegion, params: Sequence[WeightParams], max_lag: int,
                 interpolate: bool = False, threshold: float = 0.0, norms=None):
        if len(params) != region.n_cells:
            raise ValueError(f"need {region.n_cells} parameter sets, got {len(params)}")
        if max_lag < 1:
            raise ValueError("max_lag must be >= 1")
        if threshold < 0:
            raise ValueError("omission threshold must be >= 0")
        self.region = region
        self.params = tuple(params)
        self.max_lag = int(max_lag)
        self.interpolate = bool(interpolate)
        self.threshold = float(threshold)

        lags = np.arange(self.max_lag + 1, dtype=np.float64)
        raw = np.empty((region.n_cells, self.max_lag + 1))
        for c, p in enumerate(self.params):
            raw[c] = eval_raw_weight(p, lags)
        if norms is None:
            norms = raw[:, 1:].sum(axis=1)
        else:
            norms = np.asarray(norms, dtype=np.float64).copy()
        if np.any(norms <= 0):
            raise ValueError("weight curve with zero mass over lags 1..L cannot be normalized")
        self.norms = norms
        # table[c, l] = normalized weight of cell c at lag l; lag 0 unused.
        self._table = raw / norms[:, None]
        self._table[:, 0] = 0.0
        mass = self._table[:, 1:].sum(axis=1)
        if np.any(np.abs(mass - 1.0) >= 1e-9):
            raise ValueError("normalization failed to produce unit mass per cell")
        self.norms.setflags(write=False)
        self._table.setflags(write=False)

    @property
    def table(self):
        """Normalized (C, L+1) weight table; read-only."""
        return self._table

    def with_policy(self, interpolate=None, threshold=None) -> "WeightModel":
        """Copy sharing the fitted curves but with a different policy."""
        return WeightModel(
            self.region, self.params, self.max_lag,
            self.interpolate if interpolate is None else interpolate,
            self.threshold if threshold is None else threshold,
            norms=self.norms,
        )

    def _blend(self, x, y):
        """Bilinear cell-center coefficients, clamped at the domain edge.

        Returns (cells, coefs): (n, 4) integer cell indices and their blend
        coefficients summing to 1 per event.
        """
        region = self.region
        u = (np.asarray(x, dtype=np.float64) - region.x_min) / region.cell_width - 0.5
        v = (np.asarray(y, dtype=np.float64) - region.y_min) / region.cell_height - 0.5
        u = np.clip(u, 0.0, region.cols - 1.0)
        v = np.clip(v, 0.0, region.rows - 1.0)
        c0 = np.minimum(np.floor(u).astype(np.int64), max(region.cols - 2, 0))
        r0 = np.minimum(np.floor(v).astype(np.int64), max(region.rows - 2, 0))
        fx = u - c0
        fy = v - r0
        c1 = np.minimum(c0 + 1, region.cols - 1)
        r1 = np.minimum(r0 + 1, region.rows - 1)
        cells = np.stack([
            r0 * region.cols + c0,
            r0 * region.cols + c1,
            r1 * region.cols + c0,
            r1 * region.cols + c1,
        ], axis=-1)
        coefs = np.stack([
            (1 - fy) * (1 - fx),
            (1 - fy) * fx,
            fy * (1 - fx),
            fy * fx,
        ], axis=-1)
        return cells, coefs

    def weights_at(self, x, y, period, target: int):
        """Normalized weights of events (x, y, period) for prediction hour ``target``.

        All lags target - period must lie in (0, L].  Weights below the
        omission threshold come back as exactly 0.
        """
        period = np.asarray(period, dtype=np.int64)
        lag = target - period
        if lag.size and (lag.min() < 1 or lag.max() > self.max_lag):
            raise LagRangeError(
                f"lags must lie in (0, {self.max_lag}]; got range "
                f"[{lag.min()}, {lag.max()}]")
        if self.interpolate:
            cells, coefs = self._blend(x, y)
            vals = self._table[cells, lag[..., None]]
            w = (coefs * vals).sum(axis=-1)
        else:
            cell = cell_index(np.asarray(x, dtype=np.float64),
                              np.asarray(y, dtype=np.float64), self.region)
            w = self._table[cell, lag]
        if self.threshold > 0.0:
            w = np.where(w < self.threshold, 0.0, w)
        return w


def eval_weight(model: WeightModel, event: Event, target: int) -> float:
    """Weight of a single historical event for prediction hour ``target``."""
    w = model.weights_at(np.array([event.x]), np.array([event.y]),
                         np.array([event.period]), target)
    return float(w[0])


@dataclass(frozen=True)
class RetainedWindow:
    """Events from the sliding window that carry positive weight."""

    x: np.ndarray
    y: np.ndarray
    period: np.ndarray
    weight: np.ndarray
    omitted: int

    def __len__(self):
        return self.x.size

    def pairs(self):
        """Iterate (Event, weight) pairs, matching the retained order."""
        for i in range(self.x.size):
            yield Event(float(self.x[i]), float(self.y[i]), int(self.period[i])), float(self.weight[i])


def retained_window(model: WeightModel, store: EventStore, target: int) -> RetainedWindow:
    """Weighted window [target-L, target-1], with zero-weight events omitted.

    The omitted count includes thresholded events; it feeds the evaluation
    diagnostics that track how much data each prediction actually used.
    """
    if target < 1:
        raise ValueError("target must be >= 1")
    start = max(target - model.max_lag, 0)
    x, y, period = store.window(start, target)
    if x.size == 0:
        return RetainedWindow(x, y, period, np.zeros(0), 0)
    w = model.weights_at(x, y, period, target)
    keep = w > 0.0
    omitted = int(np.count_nonzero(~keep))
    return RetainedWindow(x[keep], y[keep], period[keep], w[keep], omitted)
