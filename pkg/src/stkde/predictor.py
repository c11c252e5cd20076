"""The weighted-KDE predictor: bandwidth, kernels, densities, persistence.

A prediction for hour u is the informativeness-weighted average of spatial
kernels placed at each retained historical event.  Kernels integrate to one
over the plane by construction (normalizer |H|^-1/2), so the weighted
average is itself a density.
"""

from __future__ import annotations

import enum
import hashlib
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .domain import EventStore, StudyRegion
from .errors import BandwidthError, ModelFileError, NoDataError
from .kernels import KERNEL_EPANECHNIKOV, KERNEL_GAUSSIAN, weighted_kernel_sum
from .weights import WeightModel, WeightParams, RetainedWindow, retained_window

# Floor applied to predictive densities when they are log-scored; keeps
# scores finite under bounded-support kernels and empty regions.
DENSITY_FLOOR = 1e-12

MODEL_FORMAT_VERSION = 1
_MODEL_MAGIC = "stkde model v"


class KernelKind(enum.Enum):
    """Bivariate kernels; both integrate to 1 over the plane."""

    GAUSSIAN = "gaussian"
    EPANECHNIKOV = "epanechnikov"

    @property
    def code(self) -> int:
        return KERNEL_GAUSSIAN if self is KernelKind.GAUSSIAN else KERNEL_EPANECHNIKOV

    def norm_constant(self, det: float) -> float:
        """Multiplier making K_H integrate to 1: shape constant / sqrt|H|."""
        if self is KernelKind.GAUSSIAN:
            return 1.0 / (2.0 * math.pi * math.sqrt(det))
        return 2.0 / (math.pi * math.sqrt(det))


@dataclass(frozen=True)
class Bandwidth:
    """Symmetric positive-definite 2x2 bandwidth matrix H (km^2)."""

    h11: float
    h12: float
    h22: float

    def __post_init__(self):
        if not all(np.isfinite([self.h11, self.h12, self.h22])):
            raise BandwidthError("bandwidth entries must be finite")
        if self.h11 <= 0 or self.det <= 0:
            raise BandwidthError("bandwidth matrix must be positive definite")

    @property
    def det(self) -> float:
        return self.h11 * self.h22 - self.h12 * self.h12

    @property
    def matrix(self):
        return np.array([[self.h11, self.h12], [self.h12, self.h22]])

    @property
    def inv(self):
        """Entries (a, b, c) of H^-1 = [[a, b], [b, c]]."""
        d = self.det
        return self.h22 / d, -self.h12 / d, self.h11 / d

    @classmethod
    def diagonal(cls, hx_sq: float, hy_sq: float) -> "Bandwidth":
        return cls(hx_sq, 0.0, hy_sq)


def select_bandwidth(x, y) -> Bandwidth:
    """Diagonal rule-of-thumb bandwidth from a point sample.

    Per axis, H_jj = (n^(-1/6) * sigma_j)^2 with sigma_j the smaller of the
    sample standard deviation and IQR/1.349.  A stand-in for heavier plug-in
    selectors; callers can always override with an explicit matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 20:
        raise BandwidthError(f"bandwidth selection needs >= 20 points, got {n}")
    factor = n ** (-1.0 / 6.0)
    scales = []
    for axis in (x, y):
        sd = float(np.std(axis, ddof=1))
        q75, q25 = np.percentile(axis, [75.0, 25.0])
        sigma = min(sd, float(q75 - q25) / 1.349)
        if sigma <= 0:
            raise BandwidthError("degenerate scatter: zero spread on an axis")
        scales.append(factor * sigma)
    return Bandwidth.diagonal(scales[0] ** 2, scales[1] ** 2)


def kernel_density(kind: KernelKind, bandwidth: Bandwidth, query, datum) -> float:
    """Density contribution K_H(query - datum) of a single kernel (km^-2)."""
    a, b, c = bandwidth.inv
    dx = float(query[0]) - float(datum[0])
    dy = float(query[1]) - float(datum[1])
    z = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
    norm = kind.norm_constant(bandwidth.det)
    if kind is KernelKind.GAUSSIAN:
        return norm * math.exp(-0.5 * z)
    return norm * (1.0 - z) if z < 1.0 else 0.0


def weighted_density(x, y, w, kernel: KernelKind, bandwidth: Bandwidth, qx, qy):
    """Weighted average of kernels at (x, y) evaluated at query points.

    The division by the weight total makes the result a probability density
    and also makes it invariant to rescaling all weights by any positive
    constant.
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    wsum = float(w.sum())
    if w.size == 0 or wsum <= 0.0:
        raise NoDataError("no positively-weighted events to average")
    a, b, c = bandwidth.inv
    norm = kernel.norm_constant(bandwidth.det) / wsum
    return weighted_kernel_sum(np.ascontiguousarray(x, dtype=np.float64),
                               np.ascontiguousarray(y, dtype=np.float64), w,
                               np.ascontiguousarray(qx, dtype=np.float64),
                               np.ascontiguousarray(qy, dtype=np.float64),
                               kernel.code, a, b, c, norm)


class EvalStats:
    """Thread-safe counters of prediction effort, for diagnostics."""

    def __init__(self):
        self._lock = threading.Lock()
        self.predictions = 0
        self.kernel_evals = 0
        self.retained_events = 0
        self.omitted_events = 0

    def record(self, retained: int, omitted: int, queries: int):
        with self._lock:
            self.predictions += 1
            self.kernel_evals += retained * queries
            self.retained_events += retained
            self.omitted_events += omitted

    @property
    def mean_retained(self) -> float:
        return self.retained_events / self.predictions if self.predictions else 0.0


@dataclass(frozen=True)
class DensityGrid:
    """Evaluated density surface over the bounding box."""

    x_centers: np.ndarray
    y_centers: np.ndarray
    values: np.ndarray  # shape (ny, nx), row i is y_centers[i]
    cell_area: float
    target: int
    resolution: float
    retained: int
    omitted: int

    @property
    def integral(self) -> float:
        """Discrete integral (sum of values times cell area)."""
        return float(self.values.sum() * self.cell_area)

    def write_csv(self, path):
        """Emit `x_km,y_km,density` rows plus a sidecar metadata file."""
        with open(path, "w", newline="") as fh:
            fh.write("x_km,y_km,density\n")
            for iy, yv in enumerate(self.y_centers):
                for ix, xv in enumerate(self.x_centers):
                    fh.write(f"{xv:.17g},{yv:.17g},{self.values[iy, ix]:.17g}\n")
        with open(str(path) + ".meta", "w") as fh:
            fh.write(f"target_hour = {self.target}\n")
            fh.write(f"integral = {self.integral:.17g}\n")
            fh.write(f"resolution_cells_per_km = {self.resolution:.17g}\n")
            fh.write(f"nx = {self.x_centers.size}\n")
            fh.write(f"ny = {self.y_centers.size}\n")
            fh.write(f"retained_events = {self.retained}\n")
            fh.write(f"omitted_events = {self.omitted}\n")


class DensityModel:
    """Everything needed to evaluate predictive densities for future hours.

    Immutable; safe for concurrent prediction.  The event store is supplied
    here but never serialized with the model.
    """

    def __init__(self, store: EventStore, weights: WeightModel,
                 kernel: KernelKind, bandwidth: Bandwidth):
        self.store = store
        self.weights = weights
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.stats = EvalStats()

    @property
    def max_lag(self) -> int:
        return self.weights.max_lag

    @property
    def region(self) -> StudyRegion:
        return self.weights.region

    def retained(self, target: int) -> RetainedWindow:
        return retained_window(self.weights, self.store, target)

    def density_at(self, target: int, qx, qy) -> np.ndarray:
        """Predictive density at query points for hour ``target``."""
        window = self.retained(target)
        return self._density_from_window(window, qx, qy)

    def _density_from_window(self, window: RetainedWindow, qx, qy,
                             threads: int = 1) -> np.ndarray:
        qx = np.ascontiguousarray(qx, dtype=np.float64)
        qy = np.ascontiguousarray(qy, dtype=np.float64)
        if len(window) == 0:
            raise NoDataError("no events retained in the sliding window")
        self.stats.record(len(window), window.omitted, qx.size)
        if threads > 1 and qx.size > 1:
            chunks = np.array_split(np.arange(qx.size), min(threads, qx.size))
            out = np.empty(qx.size)

            def run(idx):
                return weighted_density(window.x, window.y, window.weight,
                                        self.kernel, self.bandwidth,
                                        qx[idx], qy[idx])

            with ThreadPoolExecutor(max_workers=threads) as pool:
                for idx, part in zip(chunks, pool.map(run, chunks)):
                    out[idx] = part
            return out
        return weighted_density(window.x, window.y, window.weight,
                                self.kernel, self.bandwidth, qx, qy)

    def predict_density(self, target: int, query) -> float:
        """Scalar predictive density at one point."""
        val = self.density_at(target, np.array([query[0]]), np.array([query[1]]))
        return float(val[0])

    def predict_grid(self, target: int, resolution: float | None = None,
                     threads: int = 1) -> DensityGrid:
        """Evaluate the density at the fine evaluation grid's cell centers."""
        region = self.region
        res = float(resolution) if resolution else region.fine_cells_per_km
        nx = max(1, round(region.width * res))
        ny = max(1, round(region.height * res))
        cw = region.width / nx
        ch = region.height / ny
        xc = region.x_min + (np.arange(nx) + 0.5) * cw
        yc = region.y_min + (np.arange(ny) + 0.5) * ch
        qx = np.tile(xc, ny)
        qy = np.repeat(yc, nx)
        window = self.retained(target)
        vals = self._density_from_window(window, qx, qy, threads=threads)
        return DensityGrid(xc, yc, vals.reshape(ny, nx), cw * ch, target, res,
                           len(window), window.omitted)


@dataclass(frozen=True)
class SavedModel:
    """A fitted model as persisted: everything except the event window."""

    weights: WeightModel
    kernel: KernelKind
    bandwidth: Bandwidth

    def with_store(self, store: EventStore) -> DensityModel:
        return DensityModel(store, self.weights, self.kernel, self.bandwidth)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _model_body(saved: SavedModel) -> str:
    w = saved.weights
    r = w.region
    lines = [f"{_MODEL_MAGIC}{MODEL_FORMAT_VERSION}"]
    for name, val in (("x_min", r.x_min), ("x_max", r.x_max),
                      ("y_min", r.y_min), ("y_max", r.y_max)):
        lines.append(f"region.{name} = {_fmt(val)}")
    lines.append(f"region.rows = {r.rows}")
    lines.append(f"region.cols = {r.cols}")
    lines.append(f"region.fine_cells_per_km = {_fmt(r.fine_cells_per_km)}")
    lines.append(f"kernel = {saved.kernel.value}")
    for name, val in (("h11", saved.bandwidth.h11), ("h12", saved.bandwidth.h12),
                      ("h22", saved.bandwidth.h22)):
        lines.append(f"bandwidth.{name} = {_fmt(val)}")
    lines.append(f"max_lag = {w.max_lag}")
    lines.append(f"interpolate = {int(w.interpolate)}")
    lines.append(f"threshold = {_fmt(w.threshold)}")
    lines.append(f"t1 = {_fmt(w.params[0].t1)}")
    lines.append(f"t2 = {_fmt(w.params[0].t2)}")
    lines.append(f"n_cells = {len(w.params)}")
    for c, p in enumerate(w.params):
        for name in ("rho0", "rho1", "rho2", "rho3", "rho4"):
            lines.append(f"cell.{c}.{name} = {_fmt(getattr(p, name))}")
        lines.append(f"cell.{c}.norm = {_fmt(w.norms[c])}")
    return "\n".join(lines) + "\n"


def save_model(path, saved: SavedModel):
    """Write the versioned, checksummed model file (plain text, 17 digits)."""
    body = _model_body(saved)
    digest = hashlib.sha256(body.encode("ascii")).hexdigest()
    with open(path, "w", newline="\n") as fh:
        fh.write(body)
        fh.write(f"checksum = {digest}\n")


def load_model(path) -> SavedModel:
    """Read a model file; verifies version and checksum before parsing."""
    with open(path, "r", newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_MODEL_MAGIC):
        raise ModelFileError("not a model file (bad magic line)")
    try:
        version = int(lines[0][len(_MODEL_MAGIC):])
    except ValueError:
        raise ModelFileError("unparseable model version") from None
    if version != MODEL_FORMAT_VERSION:
        raise ModelFileError(
            f"model format v{version} not supported (expected v{MODEL_FORMAT_VERSION})")
    if not lines[-1].startswith("checksum = "):
        raise ModelFileError("model file is missing its checksum (truncated?)")
    body = "\n".join(lines[:-1]) + "\n"
    expect = lines[-1][len("checksum = "):].strip()
    digest = hashlib.sha256(body.encode("ascii")).hexdigest()
    if digest != expect:
        raise ModelFileError("model file checksum mismatch (corrupted or edited)")

    kv = {}
    for line in lines[1:-1]:
        key, _, val = line.partition(" = ")
        if not _:
            raise ModelFileError(f"malformed model line: {line!r}")
        kv[key] = val
    try:
        region = StudyRegion(
            float(kv["region.x_min"]), float(kv["region.x_max"]),
            float(kv["region.y_min"]), float(kv["region.y_max"]),
            int(kv["region.rows"]), int(kv["region.cols"]),
            float(kv["region.fine_cells_per_km"]))
        kernel = KernelKind(kv["kernel"])
        bandwidth = Bandwidth(float(kv["bandwidth.h11"]),
                              float(kv["bandwidth.h12"]),
                              float(kv["bandwidth.h22"]))
        max_lag = int(kv["max_lag"])
        interpolate = bool(int(kv["interpolate"]))
        threshold = float(kv["threshold"])
        t1 = float(kv["t1"])
        t2 = float(kv["t2"])
        n_cells = int(kv["n_cells"])
        params = []
        norms = []
        for c in range(n_cells):
            params.append(WeightParams(
                *(float(kv[f"cell.{c}.{name}"])
                  for name in ("rho0", "rho1", "rho2", "rho3", "rho4")),
                t1, t2))
            norms.append(float(kv[f"cell.{c}.norm"]))
    except KeyError as exc:
        raise ModelFileError(f"model file is missing field {exc}") from None
    weights = WeightModel(region, params, max_lag, interpolate, threshold,
                          norms=np.array(norms))
    return SavedModel(weights, kernel, bandwidth)
