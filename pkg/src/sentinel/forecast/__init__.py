"""Probabilistic forecasters: shared contracts plus two implementations."""

from .base import (
    ForecastModel,
    GaussianForecast,
    TrainConfig,
    TrainReport,
    load_model,
    register_model_kind,
    save_model,
    standardized_residuals,
)
from .convnet import ConvNetForecaster
from .seasonal import SeasonalNaiveForecaster

__all__ = [
    "ForecastModel",
    "GaussianForecast",
    "TrainConfig",
    "TrainReport",
    "ConvNetForecaster",
    "SeasonalNaiveForecaster",
    "load_model",
    "save_model",
    "register_model_kind",
    "standardized_residuals",
]
