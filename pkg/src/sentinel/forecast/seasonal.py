"""Seasonal-naive predictor: repeat last period, spread from lag residuals.

mu for step h is the value one period back at the same phase; sigma is the
standard deviation of the period-lag differences seen in training. Cheap,
deterministic, and surprisingly hard to beat on strongly periodic load
data, which makes it the reference point the learned model must justify
itself against.
"""

from __future__ import annotations

import time
from typing import Optional, Sequence

import numpy as np

from ..errors import ContextTooShort, EmptyInput, OutOfRange, SeriesTooShort
from ..series import RegularSeries
from .base import (
    ForecastModel,
    GaussianForecast,
    TrainReport,
    dense_values,
    register_model_kind,
)

__all__ = ["SeasonalNaiveForecaster"]

SIGMA_FLOOR_REL = 1e-6


def _sigma_floor(values: np.ndarray) -> float:
    scale = float(np.max(np.abs(values))) if values.size else 1.0
    return SIGMA_FLOOR_REL * max(1.0, scale)


@register_model_kind
class SeasonalNaiveForecaster(ForecastModel):
    kind = "seasonal_naive"

    def __init__(self, period: int):
        if period < 1:
            raise OutOfRange(f"period must be >= 1, got {period}", field="period")
        self.period = int(period)
        self._sigma_by_key: dict = {}
        self._global_sigma: Optional[float] = None

    # -- training -----------------------------------------------------------

    def fit(self, series: Sequence[RegularSeries]) -> TrainReport:
        if not series:
            raise EmptyInput("no series to fit")
        t0 = time.monotonic()
        sigmas = []
        nll_total = 0.0
        nll_count = 0
        for s in series:
            x = dense_values(s)
            if x.size < 2 * self.period:
                raise SeriesTooShort(
                    f"series {s.key.canonical()!r} has {x.size} slots; "
                    f"need {2 * self.period} for period {self.period}"
                )
            diffs = x[self.period:] - x[:-self.period]
            sigma = max(float(np.std(diffs)), _sigma_floor(x))
            self._sigma_by_key[s.key.canonical()] = sigma
            sigmas.append(sigma)
            nll_total += float(
                np.sum(0.5 * np.log(2 * np.pi) + np.log(sigma) + 0.5 * (diffs / sigma) ** 2)
            )
            nll_count += diffs.size
        self._global_sigma = float(np.median(sigmas))
        return TrainReport(
            epochs_run=1,
            final_loss=nll_total / nll_count,
            n_series=len(series),
            wall_time_s=time.monotonic() - t0,
            loss_curve=(nll_total / nll_count,),
        )

    # -- inference ------------------------------------------------------------

    def predict(self, context: RegularSeries, horizon: int) -> GaussianForecast:
        if horizon < 1:
            raise OutOfRange(f"horizon must be >= 1, got {horizon}", field="horizon")
        x = dense_values(context)
        if x.size < self.period:
            raise ContextTooShort(
                f"context has {x.size} slots, need one full period ({self.period})"
            )
        mu = tuple(float(x[x.size - self.period + (h % self.period)]) for h in range(horizon))
        sigma = self._sigma_by_key.get(context.key.canonical())
        if sigma is None:
            sigma = self._global_sigma
        if sigma is None:
            # Untrained: estimate spread from the context itself.
            if x.size < 2 * self.period:
                raise ContextTooShort(
                    f"untrained model needs {2 * self.period} context slots to "
                    f"estimate spread, got {x.size}"
                )
            diffs = x[self.period:] - x[:-self.period]
            sigma = max(float(np.std(diffs)), _sigma_floor(x))
        return GaussianForecast(mu=mu, sigma=(float(sigma),) * horizon)

    def one_step_scan(self, context: RegularSeries):
        """(mu, sigma) per context position from values strictly before it.

        Position t repeats the value one period back; the first ``period``
        positions have no same-phase predecessor and are returned as None.
        """
        x = dense_values(context)
        if x.size < self.period + 1:
            raise ContextTooShort(
                f"context has {x.size} slots, need {self.period + 1}"
            )
        sigma = self._sigma_by_key.get(context.key.canonical())
        if sigma is None:
            sigma = self._global_sigma
        if sigma is None:
            diffs = x[self.period:] - x[:-self.period]
            sigma = max(float(np.std(diffs)), _sigma_floor(x))
        out = []
        for t in range(x.size):
            if t < self.period:
                out.append(None)
            else:
                out.append((float(x[t - self.period]), float(sigma)))
        return out

    # -- persistence ------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "period": self.period,
            "sigma_by_key": dict(sorted(self._sigma_by_key.items())),
            "global_sigma": self._global_sigma,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SeasonalNaiveForecaster":
        model = cls(period=int(obj["period"]))
        model._sigma_by_key = {str(k): float(v) for k, v in obj["sigma_by_key"].items()}
        gs = obj.get("global_sigma")
        model._global_sigma = None if gs is None else float(gs)
        return model
