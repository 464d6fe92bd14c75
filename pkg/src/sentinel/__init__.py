"""Two-stage streaming anomaly detection.

Stage one forecasts every series probabilistically and screens points
that escape the predictive band. Stage two fits a generalized Pareto tail
to the pooled anomaly scores and keeps only the extremes an operator
should actually look at. The package exposes the same pipeline as a
library, a CLI (``sentinel``), and an HTTP service.
"""

from .detect import AnomalyCandidate, BandConfig, band_filter, confidence
from .errors import SentinelError
from .evt import EvtConfig, FitMethod, GpdFit, fit_gpd, gpd_quantile_threshold, pot_threshold
from .forecast import (
    ConvNetForecaster,
    ForecastModel,
    GaussianForecast,
    SeasonalNaiveForecaster,
    TrainConfig,
    TrainReport,
    load_model,
    save_model,
)
from .pipeline import (
    EvalResult,
    FunnelReport,
    PipelineConfig,
    WindowResult,
    inject_anomalies,
    precision_recall,
    quantile_sweep,
    run_window,
)
from .records import AnomalyRecord, ReportStore, Tier, Verdict
from .service import Service, ServiceConfig, create_app, load_config, serve
from .series import (
    ImputationPolicy,
    MetricPoint,
    RegularSeries,
    SeriesKey,
    align_to_grid,
    impute,
    smape,
)
from .store import SeriesStore

__version__ = "0.1.0"

__all__ = [
    "AnomalyCandidate",
    "AnomalyRecord",
    "BandConfig",
    "ConvNetForecaster",
    "EvalResult",
    "EvtConfig",
    "FitMethod",
    "ForecastModel",
    "FunnelReport",
    "GaussianForecast",
    "GpdFit",
    "ImputationPolicy",
    "MetricPoint",
    "PipelineConfig",
    "RegularSeries",
    "ReportStore",
    "SeasonalNaiveForecaster",
    "SentinelError",
    "SeriesKey",
    "SeriesStore",
    "Service",
    "ServiceConfig",
    "Tier",
    "TrainConfig",
    "TrainReport",
    "Verdict",
    "WindowResult",
    "align_to_grid",
    "band_filter",
    "confidence",
    "create_app",
    "fit_gpd",
    "gpd_quantile_threshold",
    "impute",
    "inject_anomalies",
    "load_config",
    "load_model",
    "serve",
    "pot_threshold",
    "precision_recall",
    "quantile_sweep",
    "run_window",
    "save_model",
    "smape",
    "__version__",
]
