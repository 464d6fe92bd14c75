"""Canonical time-series representation: keys, grid alignment, imputation, SMAPE.

A series is identified by a six-field :class:`SeriesKey` (one unique key per
dimension value of a metric on a resource). Raw points are bucketed onto a
fixed-interval grid (:func:`align_to_grid`); missing buckets are explicit
gaps until :func:`impute` fills them. All types are immutable; operations
are pure functions.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Iterable, Optional, Sequence

from .errors import AllGaps, EmptyInput, InvalidSpan, LengthMismatch
from .timeutil import format_rfc3339, parse_rfc3339

__all__ = [
    "SeriesKey",
    "MetricPoint",
    "RegularSeries",
    "ImputationPolicy",
    "align_to_grid",
    "impute",
    "smape",
]


@dataclass(frozen=True, order=True)
class SeriesKey:
    """Identity of one univariate series.

    Equality is exact and case-sensitive over all six fields;
    ``provider_id2`` may be empty.
    """

    provider_id: str
    provider_id2: str
    resource_region: str
    metric_name: str
    dimension: str
    dimension_value: str

    def __post_init__(self):
        if not self.metric_name:
            raise ValueError("metric_name must be non-empty")

    def canonical(self) -> str:
        """Stable string form, used for hashing and store layout."""
        return "\x1f".join(
            (
                self.provider_id,
                self.provider_id2,
                self.resource_region,
                self.metric_name,
                self.dimension,
                self.dimension_value,
            )
        )

    def to_json(self) -> dict:
        return {
            "provider_id": self.provider_id,
            "provider_id2": self.provider_id2,
            "resource_region": self.resource_region,
            "metric_name": self.metric_name,
            "dimension": self.dimension,
            "dimension_value": self.dimension_value,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SeriesKey":
        return cls(
            provider_id=obj["provider_id"],
            provider_id2=obj.get("provider_id2", ""),
            resource_region=obj["resource_region"],
            metric_name=obj["metric_name"],
            dimension=obj["dimension"],
            dimension_value=obj["dimension_value"],
        )


@dataclass(frozen=True)
class MetricPoint:
    """One timestamped observation. ``value is None`` marks an explicit gap
    (e.g. a null in the source document); non-gap values must be finite."""

    timestamp: datetime
    value: Optional[float]

    def __post_init__(self):
        ts = self.timestamp
        if ts.tzinfo is None:
            object.__setattr__(self, "timestamp", ts.replace(tzinfo=timezone.utc))
        else:
            object.__setattr__(self, "timestamp", ts.astimezone(timezone.utc))
        object.__setattr__(self, "timestamp", self.timestamp.replace(microsecond=0))
        if self.value is not None:
            v = float(self.value)
            if math.isnan(v) or math.isinf(v):
                raise ValueError(f"non-finite metric value: {v!r}")
            object.__setattr__(self, "value", v)

    @property
    def is_gap(self) -> bool:
        return self.value is None


class ImputationPolicy(enum.Enum):
    """How gap slots are filled. Median uses observed values of the same
    series within the training window, never the inference window."""

    ZERO = "zero"
    MEDIAN = "median"


@dataclass(frozen=True)
class RegularSeries:
    """Fixed-interval series. Slot ``i`` is the instant ``start + i*interval``;
    ``None`` values are gaps; ``imputed_mask`` records slots filled by
    :func:`impute` (always a subset of the original gap slots)."""

    key: SeriesKey
    start: datetime
    interval: timedelta
    values: tuple
    imputed_mask: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.interval.total_seconds() <= 0:
            raise InvalidSpan(f"interval must be positive, got {self.interval}")
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "imputed_mask", frozenset(self.imputed_mask))
        for i in self.imputed_mask:
            if not (0 <= i < len(self.values)):
                raise ValueError(f"imputed_mask index {i} out of range")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> datetime:
        return self.start + len(self.values) * self.interval

    def timestamp_at(self, i: int) -> datetime:
        return self.start + i * self.interval

    def gap_indices(self) -> list:
        return [i for i, v in enumerate(self.values) if v is None]

    @property
    def has_gaps(self) -> bool:
        return any(v is None for v in self.values)

    def observed_values(self) -> list:
        """Values of slots that were actually observed (not gaps, not imputed)."""
        return [v for i, v in enumerate(self.values) if v is not None and i not in self.imputed_mask]

    def slice(self, lo: int, hi: int) -> "RegularSeries":
        """Sub-series over slot range [lo, hi)."""
        if not (0 <= lo <= hi <= len(self.values)):
            raise InvalidSpan(f"slice [{lo}, {hi}) out of range for length {len(self.values)}")
        mask = frozenset(i - lo for i in self.imputed_mask if lo <= i < hi)
        return RegularSeries(
            key=self.key,
            start=self.start + lo * self.interval,
            interval=self.interval,
            values=self.values[lo:hi],
            imputed_mask=mask,
        )

    def slice_time(self, start: datetime, end: datetime) -> "RegularSeries":
        """Sub-series over timestamps in [start, end), clamped to the grid."""
        if end <= start:
            raise InvalidSpan(f"span [{start}, {end}) is empty")
        step = self.interval.total_seconds()
        lo = max(0, math.ceil((start - self.start).total_seconds() / step - 1e-9))
        hi = min(len(self.values),
                 math.ceil((end - self.start).total_seconds() / step - 1e-9))
        return self.slice(lo, max(lo, hi))

    def with_values(self, values: Sequence) -> "RegularSeries":
        if len(values) != len(self.values):
            raise LengthMismatch("replacement values must keep the series length")
        return replace(self, values=tuple(values))

    def to_json(self) -> dict:
        return {
            "key": self.key.to_json(),
            "start": format_rfc3339(self.start),
            "interval_seconds": int(self.interval.total_seconds()),
            "values": list(self.values),
            "imputed_mask": sorted(self.imputed_mask),
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, obj: dict) -> "RegularSeries":
        return cls(
            key=SeriesKey.from_json(obj["key"]),
            start=parse_rfc3339(obj["start"]),
            interval=timedelta(seconds=int(obj["interval_seconds"])),
            values=tuple(obj["values"]),
            imputed_mask=frozenset(obj.get("imputed_mask", [])),
        )


def align_to_grid(
    points: Iterable[MetricPoint],
    key: SeriesKey,
    interval: timedelta,
    span: tuple,
) -> RegularSeries:
    """Bucket raw points onto the grid defined by ``span = (start, end)``.

    Each point lands in bucket ``floor((t - start) / interval)``; multiple
    points in one bucket are averaged; buckets with no observed point are
    gaps; points outside the span (and explicit gap markers) contribute no
    value. Raises :class:`InvalidSpan` if the span is empty, inverted, or
    not a whole number of intervals.
    """
    start, end = span
    if end <= start:
        raise InvalidSpan(f"end {end} must be after start {start}")
    total = (end - start).total_seconds()
    step = interval.total_seconds()
    if step <= 0 or abs(total / step - round(total / step)) > 1e-9:
        raise InvalidSpan(f"span {total}s is not a multiple of interval {step}s")
    n = int(round(total / step))

    sums = [0.0] * n
    counts = [0] * n
    for p in points:
        if p.is_gap:
            continue
        off = (p.timestamp - start).total_seconds()
        if off < 0 or p.timestamp >= end:
            continue
        i = int(off // step)
        sums[i] += p.value
        counts[i] += 1

    values = tuple(sums[i] / counts[i] if counts[i] else None for i in range(n))
    return RegularSeries(key=key, start=start, interval=interval, values=values)


def impute(series: RegularSeries, policy: ImputationPolicy) -> RegularSeries:
    """Fill every gap slot per ``policy``; observed slots are never modified.

    The returned ``imputed_mask`` is the union of the input mask and the
    slots filled here. Median policy raises :class:`AllGaps` when the series
    has no observed values to take a median over.
    """
    gaps = series.gap_indices()
    if not gaps:
        return series

    if policy is ImputationPolicy.ZERO:
        fill = 0.0
    else:
        observed = sorted(v for v in series.values if v is not None)
        if not observed:
            raise AllGaps(f"median imputation impossible: series {series.key.canonical()!r} is all gaps")
        m = len(observed)
        fill = observed[m // 2] if m % 2 else (observed[m // 2 - 1] + observed[m // 2]) / 2.0

    values = list(series.values)
    for i in gaps:
        values[i] = fill
    return RegularSeries(
        key=series.key,
        start=series.start,
        interval=series.interval,
        values=tuple(values),
        imputed_mask=series.imputed_mask | frozenset(gaps),
    )


def smape(forecast: Sequence[float], actual: Sequence[float]) -> float:
    """Symmetric mean absolute percentage error, on the 0..200 scale.

    ``(100/n) * sum_t 2|F_t - A_t| / (|A_t| + |F_t|)`` with the per-term
    convention that a term is 0 when both values are 0.
    """
    if len(forecast) != len(actual):
        raise LengthMismatch(f"forecast has {len(forecast)} values, actual has {len(actual)}")
    if len(forecast) == 0:
        raise EmptyInput("smape needs at least one point")
    total = 0.0
    for f, a in zip(forecast, actual):
        denom = abs(f) + abs(a)
        if denom > 0.0:
            total += 2.0 * abs(f - a) / denom
    return 100.0 * total / len(forecast)
