"""Core data types: events, the hourly time grid, and the spatial study region.

Coordinates are planar kilometers throughout; time is an integer count of
one-hour periods since a configured epoch.  Bandwidths and densities inherit
their units (km, km^-2) from this choice.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import FormatError, NoDataError, OutOfDomainError

HOUR_SECONDS = 3600.0

EVENT_CSV_HEADER = ("timestamp", "x_km", "y_km")


class SpatialPoint(NamedTuple):
    """A location in the planar study coordinate system (km)."""

    x: float
    y: float


class Event(NamedTuple):
    """One demand point: a location plus the hourly period it occurred in."""

    x: float
    y: float
    period: int


@dataclass(frozen=True)
class StudyRegion:
    """Bounding box, coarse weight-cell grid, and fine export-grid resolution.

    The coarse grid (``rows`` x ``cols``) partitions the box into the cells
    over which temporal weight functions are fitted; ``fine_cells_per_km``
    sets the default resolution for exported density grids.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    rows: int
    cols: int
    fine_cells_per_km: float = 1.0

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("bounding box must have positive width and height")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("cell grid needs rows >= 1 and cols >= 1")
        if self.fine_cells_per_km <= 0:
            raise ValueError("fine_cells_per_km must be positive")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    @property
    def cell_width(self) -> float:
        return self.width / self.cols

    @property
    def cell_height(self) -> float:
        return self.height / self.rows

    def contains(self, x, y):
        """Vectorized in-box test (closed box)."""
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)

    def cell_centers(self):
        """Centers of the coarse cells as arrays (xs of cols, ys of rows)."""
        cx = self.x_min + (np.arange(self.cols) + 0.5) * self.cell_width
        cy = self.y_min + (np.arange(self.rows) + 0.5) * self.cell_height
        return cx, cy

    @classmethod
    def with_default_grid(cls, x_min, x_max, y_min, y_max, fine_cells_per_km=1.0,
                          target_cell_km=5.0):
        """Region whose coarse cells are closest to ``target_cell_km`` square."""
        cols = max(1, round((x_max - x_min) / target_cell_km))
        rows = max(1, round((y_max - y_min) / target_cell_km))
        return cls(x_min, x_max, y_min, y_max, rows, cols, fine_cells_per_km)


def cell_of(p, region: StudyRegion):
    """Row-major index of the coarse cell containing ``p``.

    Cells are half-open: a point on a shared interior boundary belongs to the
    cell with the larger index along that axis; the box's own max edges are
    closed so every in-box point maps to exactly one cell.

    Accepts a single point (SpatialPoint or (x, y)) or arrays of x/y.
    """
    if isinstance(p, tuple):
        x, y = p[0], p[1]
    else:
        x, y = p
    return cell_index(np.asarray(x, dtype=float), np.asarray(y, dtype=float), region)


def cell_index(x, y, region: StudyRegion):
    """Vectorized row-major cell lookup; raises OutOfDomainError off the box."""
    inside = region.contains(x, y)
    if not np.all(inside):
        bad = np.argwhere(~np.atleast_1d(inside))
        raise OutOfDomainError(f"{bad.shape[0]} point(s) outside the study bounding box")
    col = np.floor((x - region.x_min) / region.cell_width).astype(np.int64)
    row = np.floor((y - region.y_min) / region.cell_height).astype(np.int64)
    col = np.minimum(col, region.cols - 1)
    row = np.minimum(row, region.rows - 1)
    idx = row * region.cols + col
    return idx if idx.ndim else int(idx)


class EventStore:
    """Immutable, period-indexed collection of events.

    Events are kept as parallel arrays sorted by period (stable, so input
    order is preserved within a period).  Lookup of any period window is a
    pair of binary searches.
    """

    def __init__(self, x, y, period):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        period = np.asarray(period, dtype=np.int64)
        if not (x.shape == y.shape == period.shape):
            raise ValueError("x, y, period must have matching shapes")
        if period.size and period.min() < 0:
            raise ValueError("periods must be non-negative")
        order = np.argsort(period, kind="stable")
        self._x = x[order]
        self._y = y[order]
        self._period = period[order]
        for arr in (self._x, self._y, self._period):
            arr.setflags(write=False)

    def __len__(self):
        return self._period.size

    @property
    def x(self):
        return self._x

    @property
    def y(self):
        return self._y

    @property
    def period(self):
        return self._period

    @property
    def first_period(self) -> int:
        if not len(self):
            raise NoDataError("store is empty")
        return int(self._period[0])

    @property
    def last_period(self) -> int:
        if not len(self):
            raise NoDataError("store is empty")
        return int(self._period[-1])

    def counts(self, start: int, end: int):
        """n_t for every period in [start, end) as an int64 array."""
        if end <= start:
            return np.zeros(0, dtype=np.int64)
        lo = np.searchsorted(self._period, start, side="left")
        hi = np.searchsorted(self._period, end, side="left")
        return np.bincount(self._period[lo:hi] - start, minlength=end - start)

    def window(self, start: int, end: int):
        """Arrays (x, y, period) of all events with period in [start, end)."""
        lo = np.searchsorted(self._period, start, side="left")
        hi = np.searchsorted(self._period, end, side="left")
        return self._x[lo:hi], self._y[lo:hi], self._period[lo:hi]

    def events_in(self, start: int, end: int) -> Iterator[Event]:
        x, y, t = self.window(start, end)
        for i in range(x.size):
            yield Event(float(x[i]), float(y[i]), int(t[i]))


@dataclass(frozen=True)
class IngestReport:
    """What happened to the raw records during ingestion."""

    accepted: int
    dropped_out_of_box: int
    dropped_unparseable: int


def _parse_timestamp(raw: str, epoch_like: bool) -> float:
    """Seconds-since-Unix-epoch for one timestamp field."""
    if epoch_like:
        return float(int(raw))
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _timestamp_is_epoch_seconds(raw: str) -> bool:
    try:
        int(raw)
        return True
    except ValueError:
        return False


def ingest_events(records, region: StudyRegion, epoch: float) -> tuple[EventStore, IngestReport]:
    """Bin raw (timestamp_seconds, x, y) records into an EventStore.

    ``epoch`` is in seconds; each record maps to period
    floor((timestamp - epoch) / 3600).  Records outside the bounding box or
    with non-finite fields are dropped and counted.
    """
    xs, ys, ts = [], [], []
    out_of_box = 0
    unparseable = 0
    for rec in records:
        try:
            stamp, x, y = float(rec[0]), float(rec[1]), float(rec[2])
        except (TypeError, ValueError, IndexError):
            unparseable += 1
            continue
        if not (np.isfinite(stamp) and np.isfinite(x) and np.isfinite(y)):
            unparseable += 1
            continue
        if stamp < epoch:
            raise ValueError(f"record timestamp {stamp} precedes epoch {epoch}")
        if not region.contains(x, y):
            out_of_box += 1
            continue
        xs.append(x)
        ys.append(y)
        ts.append(int((stamp - epoch) // HOUR_SECONDS))
    if not xs:
        raise NoDataError("no events remain after filtering")
    store = EventStore(xs, ys, ts)
    return store, IngestReport(len(xs), out_of_box, unparseable)


def read_event_csv(path_or_file, region: StudyRegion, epoch=None):
    """Ingest the event CSV format: header ``timestamp,x_km,y_km``.

    Timestamps are ISO-8601 or integer epoch-seconds, auto-detected from the
    first data row (one convention per file).  When ``epoch`` is None it
    defaults to the start of the hour containing the earliest timestamp.
    Returns (EventStore, IngestReport, epoch_seconds).
    """
    if hasattr(path_or_file, "read"):
        return _read_event_csv(path_or_file, region, epoch)
    with open(path_or_file, "r", newline="") as fh:
        return _read_event_csv(fh, region, epoch)


def _read_event_csv(fh, region, epoch):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("event CSV is empty") from None
    if tuple(h.strip().lower() for h in header) != EVENT_CSV_HEADER:
        raise FormatError(f"expected header {','.join(EVENT_CSV_HEADER)!r}, got {header!r}")

    rows = [row for row in reader if row]
    epoch_like = None
    parsed = []
    unparseable = 0
    for row in rows:
        if len(row) != 3:
            unparseable += 1
            continue
        if epoch_like is None:
            epoch_like = _timestamp_is_epoch_seconds(row[0])
        try:
            stamp = _parse_timestamp(row[0], epoch_like)
            parsed.append((stamp, float(row[1]), float(row[2])))
        except (ValueError, OverflowError):
            unparseable += 1
    if not parsed:
        raise NoDataError("no parseable events in CSV")
    if epoch is None:
        earliest = min(p[0] for p in parsed)
        epoch = float(int(earliest // HOUR_SECONDS) * HOUR_SECONDS)
    store, report = ingest_events(parsed, region, epoch)
    report = IngestReport(report.accepted, report.dropped_out_of_box,
                          report.dropped_unparseable + unparseable)
    return store, report, epoch


def write_event_csv(path_or_file, store: EventStore, epoch: float = 0.0):
    """Emit a store in the standard event CSV format (epoch-seconds stamps)."""
    if hasattr(path_or_file, "write"):
        _write_event_csv(path_or_file, store, epoch)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write_event_csv(fh, store, epoch)


def _write_event_csv(fh, store, epoch):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(EVENT_CSV_HEADER)
    for i in range(len(store)):
        stamp = int(epoch + store.period[i] * HOUR_SECONDS)
        writer.writerow([stamp, repr(float(store.x[i])), repr(float(store.y[i]))])
