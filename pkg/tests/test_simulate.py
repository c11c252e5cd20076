import numpy as np
import pytest

from stkde.domain import StudyRegion
from stkde.errors import EmptyTestError
from stkde.estimation import sample_acf, share_series
from stkde.simulate import (Component, GroundTruth, ScenarioSpec, VolumeSpec,
                            simulate, truth_log_score)


def _spec(components, mean=23.0, horizon=100, seed=0, box=(0.0, 30.0, 0.0, 20.0)):
    return ScenarioSpec(box[0], box[1], box[2], box[3], tuple(components),
                        VolumeSpec(mean), horizon, seed)


CENTERED = Component(center=(15.0, 10.0), cov=(4.0, 0.5, 3.0))


class TestValidation:
    def test_degenerate_covariance(self):
        spec = _spec([Component(center=(15.0, 10.0), cov=(1.0, 2.0, 1.0))])
        with pytest.raises(ValueError):
            spec.validate()

    def test_component_leaking_outside_box(self):
        spec = _spec([Component(center=(0.5, 10.0), cov=(4.0, 0.0, 4.0))])
        with pytest.raises(ValueError, match="outside the box"):
            spec.validate()

    def test_bad_ar_coefficient(self):
        spec = _spec([Component(center=(15.0, 10.0), cov=(1.0, 0.0, 1.0),
                                ar_phi=1.0, ar_sigma=0.5)])
        with pytest.raises(ValueError):
            spec.validate()


class TestSimulate:
    def test_zero_rate_gives_empty_store(self):
        result = simulate(_spec([CENTERED], mean=0.0, horizon=50))
        assert len(result.store) == 0

    def test_single_component_mean_recovery(self):
        # enough hours at a high rate to collect ~1e5 events
        spec = _spec([CENTERED], mean=100.0, horizon=1000, seed=3)
        result = simulate(spec)
        n = len(result.store)
        assert n > 50_000
        se_x = np.sqrt(4.0 / n)
        se_y = np.sqrt(3.0 / n)
        assert abs(result.store.x.mean() - 15.0) < 3 * se_x
        assert abs(result.store.y.mean() - 10.0) < 3 * se_y

    def test_poisson_total_concentration(self):
        spec = _spec([CENTERED], mean=23.0, horizon=5000, seed=4)
        result = simulate(spec)
        expect = 23.0 * 5000
        assert abs(len(result.store) - expect) < 3 * np.sqrt(expect)

    def test_mixing_weights_sum_to_one(self):
        comps = [Component(center=(10.0, 10.0), cov=(2.0, 0.0, 2.0), daily_amp=1.0,
                           ar_phi=0.5, ar_sigma=0.4),
                 Component(center=(20.0, 10.0), cov=(2.0, 0.0, 2.0), weekly_amp=0.8)]
        result = simulate(_spec(comps, horizon=500, seed=5))
        np.testing.assert_allclose(result.truth.mix.sum(axis=1), 1.0,
                                   rtol=0, atol=1e-12)

    def test_seeded_determinism(self):
        comps = [Component(center=(10.0, 10.0), cov=(2.0, 0.0, 2.0), daily_amp=1.0,
                           ar_phi=0.5, ar_sigma=0.4), CENTERED]
        a = simulate(_spec(comps, horizon=300, seed=9))
        b = simulate(_spec(comps, horizon=300, seed=9))
        np.testing.assert_array_equal(a.store.x, b.store.x)
        np.testing.assert_array_equal(a.store.y, b.store.y)
        np.testing.assert_array_equal(a.store.period, b.store.period)
        c = simulate(_spec(comps, horizon=300, seed=10))
        assert len(c.store) != len(a.store) or not np.array_equal(a.store.x, c.store.x)

    def test_rejection_rate_reported_and_small(self):
        spec = _spec([Component(center=(6.0, 10.0), cov=(4.0, 0.0, 4.0))],
                     mean=50.0, horizon=500, seed=6)
        result = simulate(spec)
        assert result.draws >= len(result.store)
        assert result.rejection_rate < 0.01

    def test_truth_density_integrates_to_one(self):
        comps = [Component(center=(10.0, 10.0), cov=(2.0, 0.3, 2.0), daily_amp=1.0),
                 Component(center=(20.0, 12.0), cov=(3.0, 0.0, 1.5))]
        result = simulate(_spec(comps, horizon=100, seed=7))
        span_x = np.linspace(-10, 50, 301)
        span_y = np.linspace(-20, 40, 301)
        gx, gy = np.meshgrid(span_x, span_y)
        step = (span_x[1] - span_x[0]) * (span_y[1] - span_y[0])
        for t in (0, 13, 99):
            total = result.truth.density(t, gx.ravel(), gy.ravel()).sum() * step
            assert total == pytest.approx(1.0, abs=1e-3)


class TestPlantedSeasonality:
    def test_daily_cell_has_acf_peaks_at_24_and_168(self):
        comps = [
            Component(center=(7.0, 10.0), cov=(3.0, 0.0, 3.0), base=0.0,
                      daily_amp=1.5, weekly_amp=0.6, ar_phi=0.5, ar_sigma=0.2),
            Component(center=(23.0, 10.0), cov=(3.0, 0.0, 3.0), base=0.2),
        ]
        spec = _spec(comps, mean=40.0, horizon=3000, seed=11)
        result = simulate(spec)
        region = StudyRegion(0.0, 30.0, 0.0, 20.0, rows=1, cols=2)
        shares = share_series(result.store, region, (0, 3000))
        curve = sample_acf(shares[0], 200)
        acf = curve.values  # acf[lag-1]
        assert acf[23] > acf[17] and acf[23] > acf[29]
        assert acf[23] > np.mean(acf[9:14])
        assert acf[167] > acf[161] and acf[167] > acf[173]


class TestTruthLogScore:
    def test_uniform_truth_scores_zero(self):
        class UniformTruth:
            def density(self, t, qx, qy):
                return np.ones(np.shape(qx))  # unit box, density 1

        result = simulate(_spec([CENTERED], mean=10.0, horizon=50, seed=12))
        score = truth_log_score(UniformTruth(), result.store, (0, 50))
        assert score == 0.0

    def test_reproducible_under_seed(self):
        comps = [Component(center=(10.0, 10.0), cov=(2.0, 0.0, 2.0), daily_amp=1.0,
                           ar_phi=0.4, ar_sigma=0.3), CENTERED]
        s1 = simulate(_spec(comps, horizon=400, seed=13))
        s2 = simulate(_spec(comps, horizon=400, seed=13))
        a = truth_log_score(s1.truth, s1.store, (200, 400))
        b = truth_log_score(s2.truth, s2.store, (200, 400))
        assert a == b

    def test_empty_range_raises(self):
        result = simulate(_spec([CENTERED], mean=5.0, horizon=50, seed=14))
        with pytest.raises(EmptyTestError):
            truth_log_score(result.truth, result.store, (1000, 1001))
