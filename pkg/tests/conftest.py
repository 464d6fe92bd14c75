import json
import os
from datetime import timedelta

import numpy as np
import pytest

from sentinel.series import MetricPoint, RegularSeries, SeriesKey
from sentinel.timeutil import parse_rfc3339

START = parse_rfc3339("2026-01-05T00:00:00Z")
HOUR = timedelta(hours=1)


def make_key(i: int = 0, metric: str = "latency_ms") -> SeriesKey:
    return SeriesKey(
        provider_id="svc",
        provider_id2=f"host-{i:02d}",
        resource_region="eu-1",
        metric_name=metric,
        dimension="endpoint",
        dimension_value=f"api-{i:02d}",
    )


def hourly_series(values, i: int = 0, start=START) -> RegularSeries:
    return RegularSeries(key=make_key(i), start=start, interval=HOUR,
                         values=tuple(values))


def daily_cycle(hours: int, seed: int = 0, noise: float = 2.0,
                amplitude: float = 10.0, offset: float = 40.0):
    """Hourly values with a 24h cycle; the workhorse test signal."""
    rng = np.random.default_rng(seed)
    t = np.arange(hours)
    v = offset + amplitude * np.sin(2 * np.pi * t / 24) + rng.normal(0, noise, hours)
    return [float(x) for x in v]


def envelope_doc(entries) -> bytes:
    """Metric envelope document for a list of (key, [MetricPoint]) entries
    sharing one resource and metric."""
    from sentinel.ingest import serialize_metric_json

    return serialize_metric_json(entries)


@pytest.fixture
def stores(tmp_path):
    return {
        "series_store": str(tmp_path / "series"),
        "report_store": str(tmp_path / "reports"),
        "model_path": str(tmp_path / "model.json"),
    }


@pytest.fixture
def service_config(stores):
    from sentinel.service import ServiceConfig

    return ServiceConfig(scheduler=False, **stores)


@pytest.fixture
def config_file(stores, tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({**stores, "scheduler": False}))
    return str(path)
