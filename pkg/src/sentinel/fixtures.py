"""Deterministic demo data: one committed window with known tier counts.

Seeds the stores a triage front end needs to be exercised against: a week
of context plus a one-day window over a small fleet, with a fixed number
of extreme-tier and ordinary-tier records, the series behind every record
(so context charts resolve), and a trained forecaster. Counts, ids, and
values are reproducible; reseeding over an existing fixture is a no-op.
"""

from __future__ import annotations

import math
import os
from datetime import timedelta

import numpy as np

from .detect import SCORE_SPACE
from .evt import fit_gpd
from .forecast import SeasonalNaiveForecaster, save_model
from .pipeline import FunnelReport, window_id_for
from .records import AnomalyRecord, ReportStore, Tier, Verdict, record_id
from .series import RegularSeries, SeriesKey
from .store import SeriesStore
from .synthetic import DEFAULT_START
from .timeutil import format_rfc3339

__all__ = ["FIXTURE_Z_Q", "seed_fixture"]

FIXTURE_Z_Q = 6.0
PERIOD = 24
CONTEXT_HOURS = 168
WINDOW_HOURS = 24
HOUR = timedelta(hours=1)


def _fixture_key(i: int) -> SeriesKey:
    return SeriesKey(
        provider_id="demo",
        provider_id2=f"host-{i:02d}",
        resource_region="us-east-1",
        metric_name="latency_ms",
        dimension="endpoint",
        dimension_value=f"api-{i:02d}",
    )


def _base_values(rng: np.random.Generator, n: int, phase: float, noise: float) -> np.ndarray:
    # Daily cycle only: longer cycles would bias a period-24 forecaster and
    # make the demo window pop spurious candidates.
    t = np.arange(n, dtype=np.float64)
    daily = 18.0 * np.sin(2.0 * np.pi * (t / PERIOD + phase))
    return 55.0 + daily + rng.normal(0.0, noise, size=n)


def seed_fixture(
    series_store_root: str,
    report_store_root: str,
    model_path: str,
    n_series: int = 20,
    n_high: int = 8,
    n_low: int = 141,
    risk_q: float = 0.002,
    band_z: float = 4.09,
    seed: int = 7,
) -> dict:
    """Populate the stores with the demo window; idempotent per window id."""
    total_hours = CONTEXT_HOURS + WINDOW_HOURS
    if n_high + n_low > n_series * WINDOW_HOURS:
        raise ValueError(
            f"{n_high}+{n_low} records do not fit in {n_series * WINDOW_HOURS} window cells"
        )
    window_start = DEFAULT_START + timedelta(hours=CONTEXT_HOURS)
    wid = window_id_for(window_start)
    series_store = SeriesStore(series_store_root)
    report_store = ReportStore(report_store_root)
    if wid in report_store.committed_windows():
        funnel = report_store.funnel(wid)
        return {
            "window_id": wid,
            "window_start": format_rfc3339(window_start),
            "high": funnel["high_count"],
            "low": funnel["low_count"],
            "points_total": funnel["points_total"],
            "seeded": False,
        }

    rng = np.random.default_rng(seed)
    keys = [_fixture_key(i) for i in range(n_series)]
    values = [
        _base_values(rng, total_hours, phase=rng.uniform(0.0, 1.0),
                     noise=rng.uniform(1.5, 3.5))
        for _ in range(n_series)
    ]

    context = [
        RegularSeries(key=k, start=DEFAULT_START, interval=HOUR,
                      values=tuple(float(x) for x in v[:CONTEXT_HOURS]))
        for k, v in zip(keys, values)
    ]
    model = SeasonalNaiveForecaster(period=PERIOD)
    model.fit(context)
    sigma_by_key = model.to_json()["sigma_by_key"]

    # Spread the records over distinct window cells, extremes first.
    cells = rng.choice(n_series * WINDOW_HOURS, size=n_high + n_low, replace=False)
    scores = np.concatenate([
        rng.uniform(FIXTURE_Z_Q + 0.6, 10.5, size=n_high),
        rng.uniform(band_z + 0.12, FIXTURE_Z_Q - 0.15, size=n_low),
    ])

    records = []
    for cell, score in zip(cells, scores):
        i, h = int(cell) // WINDOW_HOURS, int(cell) % WINDOW_HOURS
        slot = CONTEXT_HOURS + h
        key = keys[i]
        sigma = float(sigma_by_key[key.canonical()])
        mu = float(values[i][slot - PERIOD])
        below = rng.random() < 0.3 and mu - score * sigma >= 2.0
        actual = mu - score * sigma if below else mu + score * sigma
        values[i][slot] = actual
        timestamp = DEFAULT_START + slot * HOUR
        tier = Tier.HIGH if score > FIXTURE_Z_Q else Tier.LOW
        records.append(AnomalyRecord(
            id=record_id(key, timestamp, wid),
            key=key,
            timestamp=timestamp,
            window_id=wid,
            tier=tier,
            score=float(score),
            actual=float(actual),
            mu=mu,
            sigma=sigma,
            confidence=1.0 - math.exp(-(float(score) - band_z)),
            side="below" if below else "above",
            z_q_at_detection=FIXTURE_Z_Q,
            verdict=Verdict.UNREVIEWED,
        ))
    records.sort(key=lambda r: (r.timestamp, r.key.canonical()))

    for key, v in zip(keys, values):
        if series_store.count(key) == 0:
            series_store.append(key, RegularSeries(
                key=key, start=DEFAULT_START, interval=HOUR,
                values=tuple(float(x) for x in v),
            ))
    os.makedirs(os.path.dirname(os.path.abspath(model_path)), exist_ok=True)
    save_model(model, model_path)

    # The persisted score sample is the in-sample window scan, so the
    # planted records carry exactly their assigned scores inside it.
    sample = []
    for key, v in zip(keys, values):
        full = RegularSeries(key=key, start=DEFAULT_START, interval=HOUR,
                             values=tuple(float(x) for x in v))
        for pair, value in zip(model.one_step_scan(full)[CONTEXT_HOURS:],
                               v[CONTEXT_HOURS:]):
            mu, sigma = pair
            sample.append(abs(float(value) - mu) / sigma)

    arr = np.asarray(sample, dtype=np.float64)
    threshold = float(np.quantile(arr, 0.9))
    excesses = arr[arr > threshold] - threshold
    try:
        gamma, gpd_sigma, _ = fit_gpd(excesses)
    except Exception:
        gamma, gpd_sigma = 0.1, 0.9
    funnel = FunnelReport(
        window_id=wid,
        points_total=len(sample),
        stage1_count=n_high + n_low,
        high_count=n_high,
        low_count=n_low,
        series_seen=n_series,
        series_skipped=0,
        risk_q=risk_q,
        z_q=FIXTURE_Z_Q,
        gamma=float(gamma),
        sigma=float(gpd_sigma),
        threshold_t=threshold,
        n_exceed=int(excesses.size),
        score_space=SCORE_SPACE,
        wall_time_s=0.0,
    )
    report_store.commit_window(wid, records, sample, funnel.to_json())
    return {
        "window_id": wid,
        "window_start": format_rfc3339(window_start),
        "high": n_high,
        "low": n_low,
        "points_total": len(sample),
        "seeded": True,
    }
