"""Forecast contracts shared by every predictor.

A predictor consumes a gap-free regular series and emits a Gaussian
distribution per future step. Downstream screening only ever sees
``(mu, sigma)`` pairs, so any model that can phrase its uncertainty that
way plugs in without touching the rest of the pipeline.
"""

from __future__ import annotations

import abc
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import EmptyInput, LengthMismatch, NoModel, OutOfRange
from ..series import RegularSeries

__all__ = [
    "GaussianForecast",
    "TrainConfig",
    "TrainReport",
    "ForecastModel",
    "standardized_residuals",
    "save_model",
    "load_model",
    "register_model_kind",
]


@dataclass(frozen=True)
class GaussianForecast:
    """Per-step predictive distributions: mu[i] +/- sigma[i]."""

    mu: tuple
    sigma: tuple

    def __post_init__(self):
        if len(self.mu) != len(self.sigma):
            raise LengthMismatch(f"{len(self.mu)} mu values, {len(self.sigma)} sigma values")
        if len(self.mu) == 0:
            raise EmptyInput("forecast must cover at least one step")
        for i, (m, s) in enumerate(zip(self.mu, self.sigma)):
            if not (math.isfinite(m) and math.isfinite(s)):
                raise OutOfRange(f"non-finite forecast at step {i}", field="mu")
            if s <= 0.0:
                raise OutOfRange(f"sigma must be positive at step {i}, got {s}", field="sigma")

    @property
    def horizon(self) -> int:
        return len(self.mu)

    def to_json(self) -> dict:
        return {"mu": list(self.mu), "sigma": list(self.sigma)}

    @classmethod
    def from_json(cls, obj: dict) -> "GaussianForecast":
        return cls(mu=tuple(float(v) for v in obj["mu"]),
                   sigma=tuple(float(v) for v in obj["sigma"]))


@dataclass(frozen=True)
class TrainConfig:
    """Training shape and optimizer knobs.

    The dilation stack fixes the receptive field at
    ``1 + (kernel_size - 1) * sum(dilations)``; the context length must
    cover it, with room for at least one teacher-forcing target.
    """

    context_length: int = 2016
    horizon: int = 12
    channels: int = 16
    kernel_size: int = 2
    dilations: tuple = (1, 2, 4, 8, 16, 32, 64)
    epochs: int = 30
    learning_rate: float = 0.02
    grad_clip: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise OutOfRange(f"horizon must be >= 1, got {self.horizon}", field="horizon")
        if self.channels < 1:
            raise OutOfRange(f"channels must be >= 1, got {self.channels}", field="channels")
        if self.kernel_size < 2:
            raise OutOfRange(
                f"kernel_size must be >= 2, got {self.kernel_size}", field="kernel_size"
            )
        if not self.dilations or any(d < 1 for d in self.dilations):
            raise OutOfRange("dilations must be a non-empty tuple of positive ints",
                             field="dilations")
        if self.epochs < 1:
            raise OutOfRange(f"epochs must be >= 1, got {self.epochs}", field="epochs")
        if self.learning_rate <= 0.0:
            raise OutOfRange("learning_rate must be positive", field="learning_rate")
        if self.grad_clip <= 0.0:
            raise OutOfRange("grad_clip must be positive", field="grad_clip")
        if self.context_length < self.receptive_field + 1:
            raise OutOfRange(
                f"context_length {self.context_length} cannot cover receptive field "
                f"{self.receptive_field} plus one target",
                field="context_length",
            )

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel_size - 1) * sum(self.dilations)

    def to_json(self) -> dict:
        return {
            "context_length": self.context_length,
            "horizon": self.horizon,
            "channels": self.channels,
            "kernel_size": self.kernel_size,
            "dilations": list(self.dilations),
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "grad_clip": self.grad_clip,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        return cls(
            context_length=int(obj["context_length"]),
            horizon=int(obj["horizon"]),
            channels=int(obj["channels"]),
            kernel_size=int(obj["kernel_size"]),
            dilations=tuple(int(d) for d in obj["dilations"]),
            epochs=int(obj["epochs"]),
            learning_rate=float(obj["learning_rate"]),
            grad_clip=float(obj["grad_clip"]),
            seed=int(obj["seed"]),
        )


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    final_loss: float
    n_series: int
    wall_time_s: float
    loss_curve: tuple = field(default_factory=tuple)


class ForecastModel(abc.ABC):
    """Interface every predictor implements."""

    kind: str = ""

    @abc.abstractmethod
    def fit(self, series: Sequence[RegularSeries]) -> TrainReport:
        """Train on gap-free series; returns a summary of the run."""

    @abc.abstractmethod
    def predict(self, context: RegularSeries, horizon: int) -> GaussianForecast:
        """Forecast ``horizon`` steps past the end of ``context``."""

    @abc.abstractmethod
    def to_json(self) -> dict:
        """Full state as a JSON-serializable dict (round-trips exactly)."""

    @classmethod
    @abc.abstractmethod
    def from_json(cls, obj: dict) -> "ForecastModel":
        ...


def dense_values(series: RegularSeries) -> np.ndarray:
    """Series values as a float array; gaps must already be imputed."""
    if series.has_gaps:
        raise EmptyInput(
            f"series {series.key.canonical()!r} has {len(series.gap_indices())} "
            "unimputed gaps; impute before forecasting"
        )
    return np.asarray(series.values, dtype=np.float64)


def standardized_residuals(
    actuals: Sequence[Optional[float]], forecast: GaussianForecast
) -> list:
    """(actual - mu) / sigma per step; None where the actual is a gap."""
    if len(actuals) != forecast.horizon:
        raise LengthMismatch(f"{len(actuals)} actuals vs horizon {forecast.horizon}")
    out = []
    for a, m, s in zip(actuals, forecast.mu, forecast.sigma):
        out.append(None if a is None else (float(a) - m) / s)
    return out


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_REGISTRY: dict = {}


def register_model_kind(cls) -> type:
    """Class decorator: make a model loadable by its ``kind`` tag."""
    if not cls.kind:
        raise ValueError(f"{cls.__name__} must set a non-empty kind")
    _REGISTRY[cls.kind] = cls
    return cls


def save_model(model: ForecastModel, path: str) -> None:
    payload = {"kind": model.kind, "state": model.to_json()}
    data = json.dumps(payload, sort_keys=True).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_model(path: str) -> ForecastModel:
    if not os.path.exists(path):
        raise NoModel(f"no model file at {path}")
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    if kind not in _REGISTRY:
        raise NoModel(f"unknown model kind {kind!r} in {path}")
    return _REGISTRY[kind].from_json(payload["state"])
