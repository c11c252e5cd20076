"""Synthetic demand generator with known ground-truth densities.

Hourly counts are Poisson with a configurable aggregate rate; locations are
drawn i.i.d. from a Gaussian mixture whose mixing weights follow a softmax
of per-component drivers (constant + daily sinusoid + weekly sinusoid +
AR(1) noise).  Because the exact spatial density of every hour is known, the
generator provides the oracle score that upper-bounds every estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import multivariate_normal

from .domain import EventStore
from .errors import EmptyTestError

MAX_REJECTION_MASS = 0.01


@dataclass(frozen=True)
class Component:
    """One spatial mixture component and its mixing-weight drivers."""

    center: tuple[float, float]
    cov: tuple[float, float, float]  # (c11, c12, c22)
    base: float = 0.0
    daily_amp: float = 0.0
    daily_phase: float = 0.0
    weekly_amp: float = 0.0
    weekly_phase: float = 0.0
    ar_phi: float = 0.0
    ar_sigma: float = 0.0

    def cov_matrix(self):
        c11, c12, c22 = self.cov
        return np.array([[c11, c12], [c12, c22]])


@dataclass(frozen=True)
class VolumeSpec:
    """Aggregate hourly rate: constant or a clipped sinusoid."""

    mean: float
    amplitude: float = 0.0
    period: float = 24.0
    phase: float = 0.0

    def rate(self, t):
        t = np.asarray(t, dtype=np.float64)
        r = self.mean + self.amplitude * np.sin(2.0 * np.pi * t / self.period + self.phase)
        return np.maximum(r, 0.0)


@dataclass(frozen=True)
class ScenarioSpec:
    """Full description of a synthetic city."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    components: tuple[Component, ...]
    volume: VolumeSpec
    horizon: int
    seed: int = 0

    @property
    def box_area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def validate(self):
        """Reject degenerate covariances and heavy boundary leakage.

        The sampler rejects out-of-box draws, so the realized density is the
        (unnormalized) mixture only up to the rejected mass; capping every
        component's out-of-box mass below 1% keeps that bias negligible.
        """
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("scenario box must have positive width and height")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1 hour")
        if not self.components:
            raise ValueError("scenario needs at least one component")
        if self.volume.mean < 0:
            raise ValueError("volume mean must be >= 0")
        lower = np.array([self.x_min, self.y_min])
        upper = np.array([self.x_max, self.y_max])
        for i, comp in enumerate(self.components):
            cov = comp.cov_matrix()
            if cov[0, 0] <= 0 or np.linalg.det(cov) <= 0:
                raise ValueError(f"component {i}: covariance is not positive definite")
            if not -1.0 < comp.ar_phi < 1.0:
                raise ValueError(f"component {i}: AR coefficient must be in (-1, 1)")
            if comp.ar_sigma < 0:
                raise ValueError(f"component {i}: AR innovation sigma must be >= 0")
            inside = multivariate_normal(np.asarray(comp.center), cov).cdf(
                upper, lower_limit=lower)
            if 1.0 - inside > MAX_REJECTION_MASS:
                raise ValueError(
                    f"component {i}: {100 * (1 - inside):.2f}% of its mass lies "
                    f"outside the box (limit {100 * MAX_REJECTION_MASS:.0f}%)")


class GroundTruth:
    """Evaluates the exact spatial density f_t of any simulated hour."""

    def __init__(self, spec: ScenarioSpec, mix: np.ndarray):
        self.spec = spec
        self.mix = mix  # (horizon, K) mixing weights, rows sum to 1
        self._centers = np.array([c.center for c in spec.components])
        covs = [c.cov_matrix() for c in spec.components]
        self._inv = np.array([np.linalg.inv(c) for c in covs])
        self._norm = np.array(
            [1.0 / (2.0 * math.pi * math.sqrt(np.linalg.det(c))) for c in covs])

    def density(self, t: int, qx, qy):
        qx = np.asarray(qx, dtype=np.float64)
        qy = np.asarray(qy, dtype=np.float64)
        out = np.zeros(qx.shape)
        for k in range(self._centers.shape[0]):
            dx = qx - self._centers[k, 0]
            dy = qy - self._centers[k, 1]
            a, b, c = self._inv[k, 0, 0], self._inv[k, 0, 1], self._inv[k, 1, 1]
            z = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
            out += self.mix[t, k] * self._norm[k] * np.exp(-0.5 * z)
        return out


@dataclass
class SimResult:
    """Simulated events plus the oracle density and sampler diagnostics."""

    store: EventStore
    truth: GroundTruth
    rates: np.ndarray
    rejected: int = 0
    draws: int = 0

    @property
    def rejection_rate(self) -> float:
        return self.rejected / self.draws if self.draws else 0.0


def _mixing_weights(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(spec.horizon, dtype=np.float64)
    K = len(spec.components)
    drivers = np.empty((spec.horizon, K))
    for k, comp in enumerate(spec.components):
        g = (comp.base
             + comp.daily_amp * np.sin(2.0 * np.pi * t / 24.0 + comp.daily_phase)
             + comp.weekly_amp * np.sin(2.0 * np.pi * t / 168.0 + comp.weekly_phase))
        if comp.ar_sigma > 0:
            eps = rng.standard_normal(spec.horizon)
            ar = np.empty(spec.horizon)
            ar[0] = eps[0] * comp.ar_sigma / math.sqrt(1.0 - comp.ar_phi ** 2)
            for i in range(1, spec.horizon):
                ar[i] = comp.ar_phi * ar[i - 1] + comp.ar_sigma * eps[i]
            g = g + ar
        drivers[:, k] = g
    drivers -= drivers.max(axis=1, keepdims=True)
    w = np.exp(drivers)
    w /= w.sum(axis=1, keepdims=True)
    return w


def simulate(spec: ScenarioSpec) -> SimResult:
    """Draw a full synthetic demand history (single seeded random stream)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    mix = _mixing_weights(spec, rng)
    truth = GroundTruth(spec, mix)
    chols = [np.linalg.cholesky(c.cov_matrix()) for c in spec.components]
    centers = truth._centers

    rates = spec.volume.rate(np.arange(spec.horizon))
    counts = rng.poisson(rates)
    xs, ys, ts = [], [], []
    rejected = 0
    draws = 0
    for t in range(spec.horizon):
        n = int(counts[t])
        if n == 0:
            continue
        comps = rng.choice(len(spec.components), size=n, p=mix[t])
        pos = np.empty((n, 2))
        pending = np.arange(n)
        while pending.size:
            z = rng.standard_normal((pending.size, 2))
            for k in np.unique(comps[pending]):
                sel = comps[pending] == k
                pos[pending[sel]] = centers[k] + z[sel] @ chols[k].T
            draws += pending.size
            ok = ((pos[pending, 0] >= spec.x_min) & (pos[pending, 0] <= spec.x_max)
                  & (pos[pending, 1] >= spec.y_min) & (pos[pending, 1] <= spec.y_max))
            rejected += int(np.count_nonzero(~ok))
            pending = pending[~ok]
        xs.append(pos[:, 0])
        ys.append(pos[:, 1])
        ts.append(np.full(n, t, dtype=np.int64))
    if xs:
        store = EventStore(np.concatenate(xs), np.concatenate(ys), np.concatenate(ts))
    else:
        store = EventStore(np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64))
    return SimResult(store, truth, rates, rejected, draws)


def truth_log_score(truth: GroundTruth, store: EventStore, test_range) -> float:
    """Average log ground-truth density of events in [start, end).

    By Gibbs' inequality this upper-bounds (in expectation) the average log
    score of any predictive density on the same events.
    """
    start, end = int(test_range[0]), int(test_range[1])
    x, y, t = store.window(start, end)
    if x.size == 0:
        raise EmptyTestError(f"no events in test range [{start}, {end})")
    total = 0.0
    for u in np.unique(t):
        sel = t == u
        total += float(np.log(truth.density(int(u), x[sel], y[sel])).sum())
    return total / x.size
