"""Stage-one screening: forecast bands over predicted distributions.

A point survives the screen when it lands beyond ``mu +/- z * sigma``. The
multiplier comes either from an explicit override or from the standard
normal quantile, so the band width and the nominal flag rate stay tied
together. Survivors carry a score (absolute standardized residual) that
downstream tail modelling consumes, plus a bounded confidence value for
display.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from datetime import datetime
from typing import Optional, Sequence

from scipy.stats import norm

from .errors import LengthMismatch, NegativeDistance, OutOfRange

__all__ = ["Side", "BandConfig", "AnomalyCandidate", "confidence", "band_filter"]

SCORE_SPACE = "abs_std_residual"


class Side(enum.Enum):
    ABOVE = "above"
    BELOW = "below"


@dataclass(frozen=True)
class BandConfig:
    """Band-width settings.

    quantile: one-sided normal quantile that sets the multiplier when no
        override is given (0.99998 corresponds to z of about 4.107).
    z_override: explicit multiplier; when set it wins over the quantile.
    two_sided: screen dips as well as spikes.
    """

    quantile: float = 0.99998
    z_override: Optional[float] = 4.09
    two_sided: bool = True

    def __post_init__(self):
        if not (0.5 < self.quantile < 1.0):
            raise OutOfRange(
                f"quantile must be in (0.5, 1), got {self.quantile}", field="quantile"
            )
        if self.z_override is not None and self.z_override <= 0.0:
            raise OutOfRange(
                f"z_override must be positive, got {self.z_override}", field="z_override"
            )

    @property
    def z(self) -> float:
        if self.z_override is not None:
            return float(self.z_override)
        return float(norm.ppf(self.quantile))


@dataclass(frozen=True)
class AnomalyCandidate:
    """One screened point: where it was, what was predicted, how far off."""

    index: int
    timestamp: Optional[datetime]
    actual: float
    mu: float
    sigma: float
    score: float
    confidence: float
    side: Side

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "timestamp": None if self.timestamp is None else self.timestamp.isoformat(),
            "actual": self.actual,
            "mu": self.mu,
            "sigma": self.sigma,
            "score": self.score,
            "confidence": self.confidence,
            "side": self.side.value,
        }


def confidence(distance: float, sigma: float) -> float:
    """Map distance-beyond-bound to (0, 1) via 1 - exp(-d / sigma).

    Saturating by design: a 10-sigma breach and a 40-sigma breach should
    both read as near-certain rather than stretching a linear scale.
    """
    if sigma <= 0.0:
        raise OutOfRange(f"sigma must be positive, got {sigma}", field="sigma")
    if distance < 0.0:
        raise NegativeDistance(f"distance beyond bound cannot be negative, got {distance}")
    return 1.0 - math.exp(-distance / sigma)


def band_filter(
    actuals: Sequence[float],
    mu: Sequence[float],
    sigma: Sequence[float],
    config: BandConfig,
    timestamps: Optional[Sequence[datetime]] = None,
    index_offset: int = 0,
) -> list:
    """Screen actuals against per-point Gaussian forecasts.

    Returns candidates in index order. Gap slots (actual is None) are
    skipped: a missing observation is not evidence of anything.
    """
    if len(mu) != len(actuals) or len(sigma) != len(actuals):
        raise LengthMismatch(
            f"got {len(actuals)} actuals, {len(mu)} mu, {len(sigma)} sigma"
        )
    if timestamps is not None and len(timestamps) != len(actuals):
        raise LengthMismatch(
            f"got {len(actuals)} actuals, {len(timestamps)} timestamps"
        )
    z = config.z
    out = []
    for i, actual in enumerate(actuals):
        if actual is None:
            continue
        m = float(mu[i])
        s = float(sigma[i])
        if s <= 0.0:
            raise OutOfRange(f"sigma must be positive at index {i}, got {s}", field="sigma")
        upper = m + z * s
        lower = m - z * s
        if actual > upper:
            side = Side.ABOVE
            distance = actual - upper
        elif config.two_sided and actual < lower:
            side = Side.BELOW
            distance = lower - actual
        else:
            continue
        out.append(
            AnomalyCandidate(
                index=index_offset + i,
                timestamp=None if timestamps is None else timestamps[i],
                actual=float(actual),
                mu=m,
                sigma=s,
                score=abs(float(actual) - m) / s,
                confidence=confidence(distance, s),
                side=side,
            )
        )
    return out
