"""Sliding-window backtest: average log scores for every requested method.

Fits once on the training range (bandwidth plus weight curves), then scores
each test hour's events under every method's predictive density.  Hours a
method cannot predict (no usable data) are scored with the uniform density
over the box and counted, so that no method silently skips hard hours.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import MedicConfig, medic_predict, naive_equal_weights, naive_recent_hour
from .domain import EventStore, StudyRegion
from .errors import EmptyTestError, NoDataError, StkdeError
from .estimation import FitOptions, fit_all_cells
from .predictor import (DENSITY_FLOOR, Bandwidth, DensityModel, KernelKind,
                        select_bandwidth)
from .weights import WeightModel

STKDE_METHODS = ("stkde", "stkde+interpolation", "stkde+threshold")
KNOWN_METHODS = STKDE_METHODS + ("medic", "naive-recent-hour", "naive-equal-weights")

# Display labels for the plain-text comparison table.
_TABLE_LABELS = {
    "stkde": "stKDE",
    "stkde+interpolation": "  + interpolation",
    "stkde+threshold": "  + threshold (less data)",
    "medic": "MEDIC",
    "naive-recent-hour": "naiveKDE  most recent hour",
    "naive-equal-weights": "naiveKDE  all equal weights",
}


@dataclass(frozen=True)
class BacktestPlan:
    """What to fit, what to score, and with which methods."""

    train: tuple[int, int]
    test: tuple[int, int]
    methods: tuple[str, ...]
    kernel: KernelKind = KernelKind.GAUSSIAN
    bandwidth: Bandwidth | None = None
    max_lag: int = 672
    t1: float = 24.0
    t2: float = 168.0
    fit: FitOptions = FitOptions()
    medic: MedicConfig = MedicConfig()
    threshold: float | None = None
    threshold_retain: int | None = 200
    seed: int = 0
    threads: int = 1
    density_floor: float = DENSITY_FLOOR

    def __post_init__(self):
        if not self.train[0] < self.train[1]:
            raise ValueError("training range is empty")
        if not self.test[0] < self.test[1]:
            raise ValueError("test range is empty")
        if self.train[1] > self.test[0]:
            raise ValueError("training range must precede the test range")
        unknown = [m for m in self.methods if m not in KNOWN_METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {unknown}; known: {list(KNOWN_METHODS)}")


@dataclass
class MethodReport:
    """Scores and effort diagnostics of one method."""

    name: str
    avg_log_score: float
    events_scored: int
    fallback_hours: int
    predictions: int
    kernel_evals: int
    mean_retained: float
    seconds_per_prediction: float
    per_hour: dict[int, tuple[float, int]]  # hour -> (sum of log densities, events)


@dataclass
class EvaluationReport:
    """Backtest outcome across methods."""

    train: tuple[int, int]
    test: tuple[int, int]
    seed: int
    density_floor: float
    events_scored: int
    events_skipped: int
    methods: list[MethodReport] = field(default_factory=list)

    def method(self, name: str) -> MethodReport:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def write_csv(self, path):
        """Scores and effort per method (timing lives in its own file)."""
        with open(path, "w", newline="\n") as fh:
            fh.write("method,avg_log_score,events_scored,fallback_hours,"
                     "predictions,kernel_evals,mean_retained\n")
            for m in self.methods:
                fh.write(f"{m.name},{m.avg_log_score:.17g},{m.events_scored},"
                         f"{m.fallback_hours},{m.predictions},{m.kernel_evals},"
                         f"{m.mean_retained:.17g}\n")

    def write_per_hour_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("method,hour,events,sum_log_density\n")
            for m in self.methods:
                for hour in sorted(m.per_hour):
                    s, n = m.per_hour[hour]
                    fh.write(f"{m.name},{hour},{n},{s:.17g}\n")

    def write_timings_csv(self, path):
        """Wall-clock per prediction; separate file because it varies run to run."""
        with open(path, "w", newline="\n") as fh:
            fh.write("method,seconds_per_prediction\n")
            for m in self.methods:
                fh.write(f"{m.name},{m.seconds_per_prediction:.6g}\n")

    def format_table(self) -> str:
        """Plain-text accuracy table in the usual comparison layout."""
        rows = [(_TABLE_LABELS.get(m.name, m.name), m.avg_log_score)
                for m in self.methods]
        width = max([len("Prediction method")] + [len(r[0]) for r in rows]) + 2
        lines = [f"{'Prediction method':<{width}}Accuracy",
                 "-" * (width + 8)]
        for label, score in rows:
            lines.append(f"{label:<{width}}{score:.4f}")
        return "\n".join(lines) + "\n"

    def write_table(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.format_table())


class _Runner:
    """Adapter giving every method the same (target, qx, qy) -> densities face."""

    def __init__(self, name):
        self.name = name
        self.kernel_evals = 0
        self.predictions = 0
        self.retained_sum = 0
        self._lock = threading.Lock()

    def densities(self, target, qx, qy):
        raise NotImplementedError

    @property
    def mean_retained(self):
        return self.retained_sum / self.predictions if self.predictions else 0.0


class _StkdeRunner(_Runner):
    def __init__(self, name, model: DensityModel):
        super().__init__(name)
        self.model = model

    def densities(self, target, qx, qy):
        vals = self.model.density_at(target, qx, qy)
        self.predictions = self.model.stats.predictions
        self.kernel_evals = self.model.stats.kernel_evals
        self.retained_sum = self.model.stats.retained_events
        return vals


class _MedicRunner(_Runner):
    def __init__(self, store, region, config):
        super().__init__("medic")
        self.store = store
        self.region = region
        self.config = config

    def densities(self, target, qx, qy):
        surface = medic_predict(self.store, self.region, self.config, target)
        with self._lock:
            self.predictions += 1
        return surface.density_at(qx, qy)


class _NaiveRunner(_Runner):
    def __init__(self, name, store, kernel, bandwidth, max_lag=None):
        super().__init__(name)
        self.store = store
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.max_lag = max_lag

    def densities(self, target, qx, qy):
        if self.max_lag is None:
            surface = naive_recent_hour(self.store, self.kernel, self.bandwidth, target)
        else:
            surface = naive_equal_weights(self.store, self.kernel, self.bandwidth,
                                          self.max_lag, target)
        with self._lock:
            self.predictions += 1
            self.kernel_evals += surface.n_events * np.size(qx)
            self.retained_sum += surface.n_events
        return surface.density_at(qx, qy)


def tune_omission_threshold(weights: WeightModel, store: EventStore, targets,
                            retain_target: int) -> float:
    """Pick O so that predictions retain about ``retain_target`` events.

    Bisects on the mean retained count over the probe targets.  Weight ties
    (events sharing cell and lag) make the count approximate by nature, so
    the search stops once the mean lands within 5% of the target.
    """
    base = weights.with_policy(threshold=0.0)
    probe_weights = []
    for target in targets:
        x, y, period = store.window(max(target - weights.max_lag, 0), target)
        if x.size:
            probe_weights.append(base.weights_at(x, y, period, target))
    if not probe_weights:
        raise NoDataError("no probe target had any window events")
    if np.mean([w.size for w in probe_weights]) <= retain_target:
        return 0.0

    def mean_retained(threshold):
        return float(np.mean([(w >= threshold).sum() for w in probe_weights]))

    lo, hi = 0.0, float(max(w.max() for w in probe_weights))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        kept = mean_retained(mid)
        if abs(kept - retain_target) <= 0.05 * retain_target:
            return mid
        if kept > retain_target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def average_log_score(densities_fn, store: EventStore, test_range, *,
                      box_area: float, floor: float = DENSITY_FLOOR,
                      threads: int = 1):
    """Mean log predictive density per event over [start, end).

    ``densities_fn(target, qx, qy)`` returns predictive densities and may
    raise NoDataError, in which case that hour is scored with the uniform
    density over the box and counted as a fallback.  Returns a MethodReport-
    shaped tuple (score, per_hour dict, events, fallback_hours).
    """
    start, end = int(test_range[0]), int(test_range[1])
    hours = [u for u in range(start, end) if store.counts(u, u + 1)[0] > 0]
    total_events = int(sum(store.counts(start, end)))
    if total_events == 0:
        raise EmptyTestError(f"no events to score in [{start}, {end})")
    uniform_log = float(np.log(1.0 / box_area))
    per_hour: dict[int, tuple[float, int]] = {}
    fallback_flags: dict[int, bool] = {}

    def one_hour(u):
        qx, qy, _ = store.window(u, u + 1)
        try:
            dens = densities_fn(u, qx, qy)
            vals = np.log(np.maximum(np.asarray(dens, dtype=np.float64), floor))
            return u, float(vals.sum()), qx.size, False
        except NoDataError:
            return u, uniform_log * qx.size, qx.size, True

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_hour, hours))
    else:
        results = [one_hour(u) for u in hours]
    for u, s, n, fb in results:
        per_hour[u] = (s, n)
        fallback_flags[u] = fb
    score = sum(s for s, _ in per_hour.values()) / total_events
    fallback_hours = sum(fallback_flags.values())
    return score, per_hour, total_events, fallback_hours


def run_backtest(store: EventStore, region: StudyRegion, plan: BacktestPlan) -> EvaluationReport:
    """Fit once on the training range, then score every requested method."""
    if len(store) and plan.test[0] < store.first_period + plan.max_lag:
        raise ValueError(
            f"test start {plan.test[0]} must be >= {plan.max_lag} periods "
            f"after the data start {store.first_period}")

    report = EvaluationReport(plan.train, plan.test, plan.seed, plan.density_floor,
                              events_scored=0, events_skipped=0)
    if not plan.methods:
        return report

    train_x, train_y, _ = store.window(*plan.train)
    bandwidth = plan.bandwidth if plan.bandwidth is not None else select_bandwidth(train_x, train_y)

    weight_model = None
    if any(m in STKDE_METHODS for m in plan.methods):
        fit_opts = replace(plan.fit, seed=plan.seed, threads=plan.threads)
        weight_model, _ = fit_all_cells(store, region, plan.train, plan.max_lag,
                                        fit_opts, t1=plan.t1, t2=plan.t2)

    runners = []
    for name in plan.methods:
        if name == "stkde":
            model = DensityModel(store, weight_model.with_policy(interpolate=False,
                                                                 threshold=0.0),
                                 plan.kernel, bandwidth)
            runners.append(_StkdeRunner(name, model))
        elif name == "stkde+interpolation":
            model = DensityModel(store, weight_model.with_policy(interpolate=True,
                                                                 threshold=0.0),
                                 plan.kernel, bandwidth)
            runners.append(_StkdeRunner(name, model))
        elif name == "stkde+threshold":
            threshold = plan.threshold
            if threshold is None:
                retain = plan.threshold_retain or 200
                span = plan.test[1] - plan.test[0]
                probes = [plan.test[0] + int(i * span / 16) for i in range(16)]
                threshold = tune_omission_threshold(weight_model, store, probes, retain)
            model = DensityModel(store, weight_model.with_policy(interpolate=False,
                                                                 threshold=threshold),
                                 plan.kernel, bandwidth)
            runners.append(_StkdeRunner(name, model))
        elif name == "medic":
            runners.append(_MedicRunner(store, region, plan.medic))
        elif name == "naive-recent-hour":
            runners.append(_NaiveRunner(name, store, plan.kernel, bandwidth))
        elif name == "naive-equal-weights":
            runners.append(_NaiveRunner(name, store, plan.kernel, bandwidth,
                                        plan.max_lag))

    for runner in runners:
        t0 = time.perf_counter()
        score, per_hour, events, fallbacks = average_log_score(
            runner.densities, store, plan.test, box_area=region.area,
            floor=plan.density_floor, threads=plan.threads)
        elapsed = time.perf_counter() - t0
        if fallbacks > 0.5 * len(per_hour):
            raise StkdeError(
                f"{runner.name} produced no prediction for {fallbacks} of "
                f"{len(per_hour)} test hours; its data requirements are not met")
        report.methods.append(MethodReport(
            runner.name, score, events, fallbacks, runner.predictions,
            runner.kernel_evals, runner.mean_retained,
            elapsed / max(len(per_hour), 1), per_hour))
        report.events_scored = events
    return report
