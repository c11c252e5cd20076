import io

import numpy as np
import pytest

from stkde.domain import (EventStore, StudyRegion, cell_of, ingest_events,
                          read_event_csv, write_event_csv)
from stkde.errors import FormatError, NoDataError, OutOfDomainError

from conftest import make_store


class TestStudyRegion:
    def test_rejects_empty_box(self):
        with pytest.raises(ValueError):
            StudyRegion(0.0, 0.0, 0.0, 1.0, 1, 1)

    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            StudyRegion(0.0, 1.0, 0.0, 1.0, 0, 3)

    def test_default_grid_targets_5km_cells(self):
        region = StudyRegion.with_default_grid(0.0, 35.0, 0.0, 15.0)
        assert (region.rows, region.cols) == (3, 7)
        assert region.n_cells == 21

    def test_cell_centers(self):
        region = StudyRegion(0.0, 1.0, 0.0, 2.0, rows=2, cols=2)
        cx, cy = region.cell_centers()
        np.testing.assert_allclose(cx, [0.25, 0.75])
        np.testing.assert_allclose(cy, [0.5, 1.5])


class TestCellOf:
    def test_single_cell(self, unit_region):
        assert cell_of((0.3, 0.7), unit_region) == 0
        assert cell_of((0.0, 0.0), unit_region) == 0
        assert cell_of((1.0, 1.0), unit_region) == 0

    def test_quadrants(self, quad_region):
        # (x=0.75, y=0.25) -> column 1, row 0
        assert cell_of((0.75, 0.25), quad_region) == 1
        assert cell_of((0.25, 0.25), quad_region) == 0
        assert cell_of((0.25, 0.75), quad_region) == 2
        assert cell_of((0.75, 0.75), quad_region) == 3

    def test_outside_box_raises(self, unit_region):
        with pytest.raises(OutOfDomainError):
            cell_of((1.5, 0.5), unit_region)

    def test_boundary_points_oracle(self):
        """Half-open rule: interior boundaries go to the larger index."""
        region = StudyRegion(0.0, 3.0, 0.0, 2.0, rows=2, cols=3)

        def oracle(x, y):
            # explicit interval checks: cell (r, c) is [c, c+1) x [r, r+1),
            # closed on the box's max edges
            for r in range(2):
                for c in range(3):
                    x_hi_ok = x < c + 1 or (c == 2 and x <= 3.0)
                    y_hi_ok = y < r + 1 or (r == 1 and y <= 2.0)
                    if c <= x and x_hi_ok and r <= y and y_hi_ok:
                        return r * 3 + c
            raise AssertionError("point not covered")

        pts = [(1.0, 0.5), (2.0, 1.0), (0.0, 0.0), (3.0, 2.0), (1.0, 1.0),
               (2.0, 0.0), (0.5, 1.0), (3.0, 0.5), (1.5, 2.0)]
        for x, y in pts:
            assert cell_of((x, y), region) == oracle(x, y), (x, y)

    def test_partition_property(self):
        """Every in-box point maps to exactly one cell; per-cell counts sum to n_t."""
        rng = np.random.default_rng(7)
        region = StudyRegion(0.0, 10.0, 0.0, 10.0, rows=3, cols=4)
        store = make_store(rng, 5000, 50)
        cells = cell_of((store.x, store.y), region)
        assert cells.min() >= 0 and cells.max() < region.n_cells
        for t in range(50):
            x, y, _ = store.window(t, t + 1)
            if x.size:
                per_cell = np.bincount(cell_of((x, y), region),
                                       minlength=region.n_cells)
                assert per_cell.sum() == x.size


class TestEventStore:
    def test_counts_and_window(self):
        store = EventStore([0.1, 0.2, 0.3], [0.5, 0.6, 0.7], [5, 3, 5])
        np.testing.assert_array_equal(store.counts(3, 7), [1, 0, 2, 0])
        x, _, t = store.window(5, 6)
        assert x.size == 2 and set(t) == {5}
        assert store.first_period == 3
        assert store.last_period == 5

    def test_total_count_invariant(self):
        rng = np.random.default_rng(3)
        store = make_store(rng, 1000, 24)
        assert int(store.counts(0, 24).sum()) == len(store)

    def test_immutable(self):
        store = EventStore([0.1], [0.5], [0])
        with pytest.raises(ValueError):
            store.x[0] = 2.0


class TestIngest:
    def test_hour_binning(self, unit_region):
        # epoch+0.5h, +1.2h, +1.9h -> n_0 = 1, n_1 = 2
        records = [(1800.0, 0.5, 0.5), (4320.0, 0.4, 0.4), (6840.0, 0.3, 0.3)]
        store, report = ingest_events(records, unit_region, epoch=0.0)
        np.testing.assert_array_equal(store.counts(0, 2), [1, 2])
        assert report.accepted == 3

    def test_out_of_box_dropped_and_counted(self, unit_region):
        records = [(0.0, 0.5, 0.5), (0.0, 2.0, 0.5)]
        store, report = ingest_events(records, unit_region, epoch=0.0)
        assert len(store) == 1
        assert report.dropped_out_of_box == 1

    def test_unparseable_dropped_and_counted(self, unit_region):
        records = [(0.0, 0.5, 0.5), ("bad", 0.1, 0.1), (0.0, float("nan"), 0.2)]
        store, report = ingest_events(records, unit_region, epoch=0.0)
        assert len(store) == 1
        assert report.dropped_unparseable == 2

    def test_empty_after_filtering(self, unit_region):
        with pytest.raises(NoDataError):
            ingest_events([(0.0, 5.0, 5.0)], unit_region, epoch=0.0)

    def test_epoch_after_timestamp_rejected(self, unit_region):
        with pytest.raises(ValueError):
            ingest_events([(100.0, 0.5, 0.5)], unit_region, epoch=200.0)


class TestEventCsv:
    def test_malformed_header(self, unit_region):
        fh = io.StringIO("time,x,y\n0,0.5,0.5\n")
        with pytest.raises(FormatError):
            read_event_csv(fh, unit_region)

    def test_iso_timestamps(self, unit_region):
        fh = io.StringIO("timestamp,x_km,y_km\n"
                         "2008-01-01T00:30:00Z,0.5,0.5\n"
                         "2008-01-01T01:10:00Z,0.4,0.4\n")
        store, report, epoch = read_event_csv(fh, unit_region)
        np.testing.assert_array_equal(store.counts(0, 2), [1, 1])
        assert report.accepted == 2

    def test_round_trip_preserves_counts(self):
        """CSV round trip of a large synthetic store is lossless."""
        rng = np.random.default_rng(11)
        region = StudyRegion(0.0, 10.0, 0.0, 10.0, rows=2, cols=2)
        store = make_store(rng, 10_000, 300)
        buf = io.StringIO()
        write_event_csv(buf, store, epoch=0.0)
        buf.seek(0)
        loaded, report, _ = read_event_csv(buf, region, epoch=0.0)
        assert report.accepted == len(store)
        np.testing.assert_array_equal(loaded.counts(0, 300), store.counts(0, 300))
        np.testing.assert_allclose(np.sort(loaded.x), np.sort(store.x))

    def test_ingestion_deterministic(self):
        rng = np.random.default_rng(5)
        store = make_store(rng, 500, 20)
        buf = io.StringIO()
        write_event_csv(buf, store, epoch=0.0)
        text = buf.getvalue()
        region = StudyRegion(0.0, 10.0, 0.0, 10.0, rows=1, cols=1)
        a, _, _ = read_event_csv(io.StringIO(text), region)
        b, _, _ = read_event_csv(io.StringIO(text), region)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.period, b.period)
