"""Telemetry ingestion: metric-envelope JSON and benchmark CSV parsing.

The envelope format mirrors how monitor exports group points: one document
per (resource, metric) carrying one inner series per dimension value. Keys
map as ``provider_id <- resource_type``, ``provider_id2 <- resource_id``,
``resource_region <- region``. Null point values become explicit gap
markers, never zeros.
"""

from __future__ import annotations

import json
from collections import defaultdict
from datetime import datetime, timedelta
from typing import Iterable, Optional, Sequence

from .errors import FormatError, MalformedJson, SchemaViolation, ShortFile
from .series import MetricPoint, RegularSeries, SeriesKey
from .timeutil import format_rfc3339, parse_rfc3339

__all__ = [
    "parse_metric_json",
    "serialize_metric_json",
    "load_electricity",
    "load_value_csv",
]

ELECTRICITY_METRIC = "consumption_kW"


def _require(obj: dict, field: str, path: str):
    if field not in obj:
        raise SchemaViolation(f"missing required field at {path}.{field}", path=f"{path}.{field}")
    return obj[field]


def parse_metric_json(document: bytes) -> list:
    """Parse one metric envelope into ``[(SeriesKey, [MetricPoint, ...]), ...]``.

    One entry per dimension value; points sorted by timestamp; null values
    kept as gap markers so no point is silently dropped.
    """
    try:
        doc = json.loads(document.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise MalformedJson(f"document is not UTF-8: {e}", offset=e.start) from e
    except json.JSONDecodeError as e:
        raise MalformedJson(f"invalid JSON: {e.msg} at offset {e.pos}", offset=e.pos) from e

    if not isinstance(doc, dict):
        raise SchemaViolation("top-level value must be an object", path="$")

    metric_name = _require(doc, "metric_name", "$")
    if not isinstance(metric_name, str) or not metric_name:
        raise SchemaViolation("metric_name must be a non-empty string", path="$.metric_name")
    timeseries = _require(doc, "timeseries", "$")
    if not isinstance(timeseries, list):
        raise SchemaViolation("timeseries must be an array", path="$.timeseries")

    resource_type = str(doc.get("resource_type", ""))
    resource_id = str(doc.get("resource_id", ""))
    region = str(doc.get("region", ""))

    out = []
    for si, inner in enumerate(timeseries):
        spath = f"$.timeseries[{si}]"
        if not isinstance(inner, dict):
            raise SchemaViolation("timeseries entry must be an object", path=spath)
        dimension = str(_require(inner, "dimension", spath))
        dimension_value = str(_require(inner, "dimension_value", spath))
        raw_points = _require(inner, "points", spath)
        if not isinstance(raw_points, list):
            raise SchemaViolation("points must be an array", path=f"{spath}.points")

        key = SeriesKey(
            provider_id=resource_type,
            provider_id2=resource_id,
            resource_region=region,
            metric_name=metric_name,
            dimension=dimension,
            dimension_value=dimension_value,
        )
        points = []
        for pi, rp in enumerate(raw_points):
            ppath = f"{spath}.points[{pi}]"
            if not isinstance(rp, dict):
                raise SchemaViolation("point must be an object", path=ppath)
            ts_raw = _require(rp, "timestamp", ppath)
            try:
                ts = parse_rfc3339(str(ts_raw))
            except ValueError as e:
                raise SchemaViolation(f"bad timestamp {ts_raw!r}: {e}", path=f"{ppath}.timestamp") from e
            value = rp.get("value", None)
            if value is not None:
                try:
                    value = float(value)
                except (TypeError, ValueError) as e:
                    raise SchemaViolation(f"bad value {value!r}", path=f"{ppath}.value") from e
            try:
                points.append(MetricPoint(timestamp=ts, value=value))
            except ValueError as e:
                raise SchemaViolation(str(e), path=f"{ppath}.value") from e
        points.sort(key=lambda p: p.timestamp)
        out.append((key, points))
    return out


def serialize_metric_json(entries: Sequence, unit: str = "") -> bytes:
    """Inverse of :func:`parse_metric_json`: group keyed series back into
    envelope documents (one per resource/metric group, concatenated into a
    JSON array when more than one group is present)."""
    groups = defaultdict(list)
    for key, points in entries:
        gk = (key.provider_id, key.provider_id2, key.resource_region, key.metric_name)
        groups[gk].append((key, points))

    docs = []
    for (rtype, rid, region, metric), members in groups.items():
        docs.append(
            {
                "resource_type": rtype,
                "resource_id": rid,
                "region": region,
                "metric_name": metric,
                "unit": unit,
                "timeseries": [
                    {
                        "dimension": key.dimension,
                        "dimension_value": key.dimension_value,
                        "points": [
                            {"timestamp": format_rfc3339(p.timestamp), "value": p.value}
                            for p in points
                        ],
                    }
                    for key, points in members
                ],
            }
        )
    payload = docs[0] if len(docs) == 1 else docs
    return json.dumps(payload, sort_keys=True).encode("utf-8")


# ---------------------------------------------------------------------------
# Benchmark loaders
# ---------------------------------------------------------------------------


def _parse_decimal_comma(token: str, line_no: int) -> float:
    token = token.strip()
    if token == "":
        raise FormatError(f"empty value field on line {line_no}")
    if "." in token:
        # The format uses ',' as the decimal mark; a '.' means we are
        # reading the wrong kind of file.
        raise FormatError(f"unexpected '.' decimal mark on line {line_no}: {token!r}")
    try:
        return float(token.replace(",", "."))
    except ValueError as e:
        raise FormatError(f"unparseable value {token!r} on line {line_no}") from e


def load_electricity(
    path: str,
    window_hours: int,
    max_customers: Optional[int] = None,
    customers: Optional[Sequence[str]] = None,
) -> list:
    """Load the household-load text format into hourly series.

    Expected format: ';'-separated, ',' as decimal mark, header row with
    customer column names, first column a timestamp, then one kW reading
    per customer every 15 minutes. Each hour becomes the mean of its four
    readings; the last ``window_hours`` complete hours are returned, one
    :class:`RegularSeries` per customer with the customer id as the
    dimension value.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if ";" not in header:
            raise FormatError("expected ';' delimiter in header row")
        columns = [c.strip().strip('"') for c in header.rstrip("\n").split(";")]
        names = columns[1:]
        if customers is not None:
            wanted = [n for n in names if n in set(customers)]
        else:
            wanted = names[:max_customers] if max_customers else names
        idx = [names.index(n) + 1 for n in wanted]

        timestamps = []
        rows = []
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(";")
            if len(parts) != len(columns):
                raise FormatError(f"line {line_no}: expected {len(columns)} fields, got {len(parts)}")
            try:
                ts = parse_rfc3339(parts[0].strip().strip('"'))
            except ValueError as e:
                raise FormatError(f"line {line_no}: bad timestamp {parts[0]!r}") from e
            timestamps.append(ts)
            rows.append([_parse_decimal_comma(parts[i], line_no) for i in idx])

    if not rows:
        raise ShortFile("file has no data rows")

    # Bucket 15-minute readings by the hour containing the timestamp.
    hour = timedelta(hours=1)
    by_hour: dict = {}
    for ts, row in zip(timestamps, rows):
        hts = ts.replace(minute=0, second=0)
        by_hour.setdefault(hts, []).append(row)

    hours = sorted(h for h, readings in by_hour.items() if len(readings) == 4)
    if len(hours) < window_hours:
        raise ShortFile(f"only {len(hours)} complete hours available, need {window_hours}")
    hours = hours[-window_hours:]

    # Hourly index must be contiguous for a regular grid.
    for a, b in zip(hours, hours[1:]):
        if b - a != hour:
            raise FormatError(f"hour gap between {a} and {b}; file is not contiguous")

    out = []
    for ci, name in enumerate(wanted):
        values = tuple(
            sum(r[ci] for r in by_hour[h]) / 4.0
            for h in hours
        )
        key = SeriesKey(
            provider_id="benchmark",
            provider_id2="",
            resource_region="",
            metric_name=ELECTRICITY_METRIC,
            dimension="customer",
            dimension_value=name,
        )
        out.append(RegularSeries(key=key, start=hours[0], interval=hour, values=values))
    return out


def load_value_csv(path: str, key: SeriesKey, interval: timedelta, start: datetime) -> RegularSeries:
    """Generic single-column loader: one value per line (blank line = gap).

    Stand-in for datasets that cannot be redistributed; pairs with the
    synthetic generators for benchmark-style runs.
    """
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            token = line.strip()
            if token == "" or token.lower() in ("nan", "null"):
                values.append(None)
                continue
            try:
                values.append(float(token))
            except ValueError as e:
                raise FormatError(f"line {line_no}: unparseable value {token!r}") from e
    if not values:
        raise ShortFile("file has no rows")
    return RegularSeries(key=key, start=start, interval=interval, values=tuple(values))
