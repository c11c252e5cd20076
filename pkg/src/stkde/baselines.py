"""Comparison predictors: the MEDIC industry method and two naive KDEs.

MEDIC averages historical cell counts at corresponding hours of preceding
weeks (and, when data reaches back far enough, of past years at week-aligned
offsets), then normalizes the averaged count surface into a density.  The
naive KDEs reuse the predictor's kernel machinery with all weights equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import EventStore, StudyRegion
from .errors import NoDataError
from .kernels import weighted_kernel_sum
from .predictor import DENSITY_FLOOR, Bandwidth, KernelKind

WEEK_HOURS = 168
YEAR_HOURS = 52 * WEEK_HOURS  # 8736: week-aligned "same hour of the year"


@dataclass(frozen=True)
class MedicConfig:
    """Knobs of the industry averaging method."""

    cell_km: float = 1.0
    lookback_weeks: int = 4
    lookback_years: int = 2
    anchor_x: float = 0.0  # grid-line offset, for partition-sensitivity runs
    anchor_y: float = 0.0
    density_floor: float = DENSITY_FLOOR

    def __post_init__(self):
        if self.cell_km <= 0:
            raise ValueError("cell size must be positive")
        if self.lookback_weeks < 1:
            raise ValueError("lookback weeks must be >= 1")
        if self.lookback_years < 0:
            raise ValueError("lookback years must be >= 0")

    def lookback_hours(self, target: int):
        """Candidate historical hours, before availability filtering."""
        hours = [target - WEEK_HOURS * k for k in range(1, self.lookback_weeks + 1)]
        for y in range(1, self.lookback_years + 1):
            for k in range(self.lookback_weeks):
                hours.append(target - YEAR_HOURS * y - WEEK_HOURS * k)
        return hours


class MedicSurface:
    """Piecewise-constant density over the 1-km-scale MEDIC grid."""

    def __init__(self, region: StudyRegion, config: MedicConfig, values,
                 x0: float, y0: float, hours_used: int, uniform: bool):
        self.region = region
        self.config = config
        self.values = values  # (ny, nx) densities, km^-2
        self.x0 = x0
        self.y0 = y0
        self.hours_used = hours_used
        self.uniform = uniform

    def density_at(self, qx, qy):
        qx = np.asarray(qx, dtype=np.float64)
        qy = np.asarray(qy, dtype=np.float64)
        c = self.config.cell_km
        ix = np.floor((qx - self.x0) / c).astype(np.int64)
        iy = np.floor((qy - self.y0) / c).astype(np.int64)
        ix = np.clip(ix, 0, self.values.shape[1] - 1)
        iy = np.clip(iy, 0, self.values.shape[0] - 1)
        return self.values[iy, ix]

    def integral(self, areas=None) -> float:
        if areas is None:
            areas = _cell_areas(self.region, self.config, self.x0, self.y0,
                                self.values.shape)
        return float((self.values * areas).sum())


def _grid_origin(lo: float, anchor: float, cell: float) -> float:
    shift = anchor % cell
    return lo if shift == 0.0 else lo + shift - cell


def _cell_areas(region: StudyRegion, config: MedicConfig, x0, y0, shape):
    """Areas of grid cells clipped to the bounding box."""
    ny, nx = shape
    c = config.cell_km
    xl = x0 + np.arange(nx) * c
    xr = np.minimum(xl + c, region.x_max)
    xl = np.maximum(xl, region.x_min)
    yl = y0 + np.arange(ny) * c
    yr = np.minimum(yl + c, region.y_max)
    yl = np.maximum(yl, region.y_min)
    return np.maximum(yr - yl, 0.0)[:, None] * np.maximum(xr - xl, 0.0)[None, :]


def medic_predict(store: EventStore, region: StudyRegion, config: MedicConfig,
                  target: int) -> MedicSurface:
    """Average corresponding-hour cell counts and normalize to a density.

    Hours outside the data's observed period range are skipped; if none of
    the lookback hours are available the method has no basis to predict and
    raises NoDataError.  An all-zero averaged surface falls back to the
    uniform density over the box.
    """
    if len(store) == 0:
        raise NoDataError("event store is empty")
    lo, hi = store.first_period, store.last_period
    hours = [h for h in config.lookback_hours(target) if lo <= h <= hi]
    if not hours:
        raise NoDataError(f"no MEDIC lookback hour before {target} is in the data")

    c = config.cell_km
    x0 = _grid_origin(region.x_min, config.anchor_x, c)
    y0 = _grid_origin(region.y_min, config.anchor_y, c)
    nx = int(math.ceil((region.x_max - x0) / c - 1e-12))
    ny = int(math.ceil((region.y_max - y0) / c - 1e-12))
    counts = np.zeros((ny, nx))
    for h in hours:
        x, y, _ = store.window(h, h + 1)
        if x.size == 0:
            continue
        ix = np.clip(np.floor((x - x0) / c).astype(np.int64), 0, nx - 1)
        iy = np.clip(np.floor((y - y0) / c).astype(np.int64), 0, ny - 1)
        np.add.at(counts, (iy, ix), 1.0)
    avg = counts / len(hours)

    areas = _cell_areas(region, config, x0, y0, (ny, nx))
    total = float((avg * areas).sum())
    if total <= 0.0:
        values = np.full((ny, nx), 1.0 / region.area)
        return MedicSurface(region, config, values, x0, y0, len(hours), True)
    values = avg / total
    return MedicSurface(region, config, values, x0, y0, len(hours), False)


class KdeSurface:
    """Unweighted KDE over a fixed event set (shared kernel machinery)."""

    def __init__(self, x, y, kernel: KernelKind, bandwidth: Bandwidth):
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        if self.x.size == 0:
            raise NoDataError("no events to build a KDE from")
        self.kernel = kernel
        self.bandwidth = bandwidth
        self._weights = np.ones(self.x.size)

    @property
    def n_events(self) -> int:
        return self.x.size

    def density_at(self, qx, qy):
        a, b, c = self.bandwidth.inv
        norm = self.kernel.norm_constant(self.bandwidth.det) / self.x.size
        return weighted_kernel_sum(self.x, self.y, self._weights,
                                   np.ascontiguousarray(qx, dtype=np.float64),
                                   np.ascontiguousarray(qy, dtype=np.float64),
                                   self.kernel.code, a, b, c, norm)


def naive_recent_hour(store: EventStore, kernel: KernelKind, bandwidth: Bandwidth,
                      target: int) -> KdeSurface:
    """KDE over the single most recent hour before ``target``."""
    x, y, _ = store.window(target - 1, target)
    if x.size == 0:
        raise NoDataError(f"hour {target - 1} has no events")
    return KdeSurface(x, y, kernel, bandwidth)


def naive_equal_weights(store: EventStore, kernel: KernelKind, bandwidth: Bandwidth,
                        max_lag: int, target: int) -> KdeSurface:
    """Equal-weight KDE over the whole sliding window before ``target``."""
    x, y, _ = store.window(max(target - max_lag, 0), target)
    if x.size == 0:
        raise NoDataError(f"window [{target - max_lag}, {target}) has no events")
    return KdeSurface(x, y, kernel, bandwidth)
