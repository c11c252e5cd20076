"""Hourly spatio-temporal demand-density forecasting.

Predictive spatial densities for future hourly periods via a weighted kernel
density estimator whose weights score how informative each historical
observation is, learned per neighborhood from the autocorrelation of demand
shares.  Includes industry-style and naive-KDE baselines plus a log-score
backtest harness and a synthetic generator with known ground truth.
"""

from .baselines import (KdeSurface, MedicConfig, MedicSurface, medic_predict,
                        naive_equal_weights, naive_recent_hour)
from .domain import (Event, EventStore, IngestReport, SpatialPoint, StudyRegion,
                     cell_of, ingest_events, read_event_csv, write_event_csv)
from .errors import (BandwidthError, ConfigError, DataError, DegenerateSeriesError,
                     EmptyTestError, FitFailedError, FormatError, LagRangeError,
                     ModelFileError, NoDataError, NumericalError, OutOfDomainError,
                     StkdeError)
from .estimation import (AcfCurve, FitOptions, FitResult, ShareSeries, fit_all_cells,
                         fit_weight_params, pooled_acf, positive_part, sample_acf,
                         share_series)
from .evaluation import (BacktestPlan, EvaluationReport, MethodReport,
                         average_log_score, run_backtest, tune_omission_threshold)
from .kernels import BACKEND, available_backends, weighted_kernel_sum
from .predictor import (DENSITY_FLOOR, Bandwidth, DensityGrid, DensityModel,
                        KernelKind, SavedModel, kernel_density, load_model,
                        save_model, select_bandwidth, weighted_density)
from .simulate import (Component, GroundTruth, ScenarioSpec, SimResult, VolumeSpec,
                       simulate, truth_log_score)
from .weights import (RetainedWindow, WeightModel, WeightParams, eval_raw_weight,
                      eval_weight, retained_window)

__version__ = "0.1.0"

__all__ = [
    "AcfCurve", "BACKEND", "BacktestPlan", "Bandwidth", "BandwidthError",
    "Component", "ConfigError", "DENSITY_FLOOR", "DataError",
    "DegenerateSeriesError", "DensityGrid", "DensityModel", "EmptyTestError",
    "EvaluationReport", "Event", "EventStore", "FitFailedError", "FitOptions",
    "FitResult", "FormatError", "GroundTruth", "IngestReport", "KdeSurface",
    "KernelKind", "LagRangeError", "MedicConfig", "MedicSurface", "MethodReport",
    "ModelFileError", "NoDataError", "NumericalError", "OutOfDomainError",
    "RetainedWindow", "SavedModel", "ScenarioSpec", "ShareSeries", "SimResult",
    "SpatialPoint", "StkdeError", "StudyRegion", "VolumeSpec", "WeightModel",
    "WeightParams", "average_log_score", "available_backends", "cell_of",
    "eval_raw_weight", "eval_weight", "fit_all_cells", "fit_weight_params",
    "ingest_events", "kernel_density", "load_model", "medic_predict",
    "naive_equal_weights", "naive_recent_hour", "pooled_acf", "positive_part",
    "read_event_csv", "retained_window", "run_backtest", "sample_acf",
    "save_model", "select_bandwidth", "share_series", "simulate",
    "truth_log_score", "tune_omission_threshold", "weighted_density",
    "weighted_kernel_sum", "write_event_csv",
]
