import json
from datetime import timedelta

import pytest

from sentinel.errors import FormatError, MalformedJson, SchemaViolation, ShortFile
from sentinel.ingest import load_electricity, parse_metric_json, serialize_metric_json
from sentinel.series import MetricPoint, SeriesKey
from sentinel.synthetic import write_electricity_file

from conftest import HOUR, START, make_key


def _doc(points):
    return json.dumps({
        "resource_type": "svc",
        "resource_id": "host-00",
        "region": "eu-1",
        "metric_name": "latency_ms",
        "timeseries": [
            {"dimension": "endpoint", "dimension_value": "api-00", "points": points},
        ],
    }).encode()


def test_parse_envelope():
    doc = _doc([
        {"timestamp": "2026-01-05T00:00:00Z", "value": 1.5},
        {"timestamp": "2026-01-05T01:00:00Z", "value": None},
        {"timestamp": "2026-01-05T02:00:00Z", "value": 3.0},
    ])
    entries = parse_metric_json(doc)
    assert len(entries) == 1
    key, pts = entries[0]
    assert key == make_key(0)
    assert [p.value for p in pts] == [1.5, None, 3.0]
    assert pts[0].timestamp == START


def test_parse_sorts_points():
    doc = _doc([
        {"timestamp": "2026-01-05T02:00:00Z", "value": 2.0},
        {"timestamp": "2026-01-05T00:00:00Z", "value": 0.0},
    ])
    _, pts = parse_metric_json(doc)[0]
    assert [p.timestamp for p in pts] == [START, START + 2 * HOUR]


def test_round_trip_through_serializer():
    # two dimension values under one resource: stays a single envelope
    key_a = make_key(0)
    key_b = SeriesKey(provider_id=key_a.provider_id, provider_id2=key_a.provider_id2,
                      resource_region=key_a.resource_region, metric_name=key_a.metric_name,
                      dimension="endpoint", dimension_value="api-99")
    entries = [(key_a, [MetricPoint(START, 1.0), MetricPoint(START + HOUR, 2.0)]),
               (key_b, [MetricPoint(START, 7.0)])]
    back = parse_metric_json(serialize_metric_json(entries))
    assert {k.canonical() for k, _ in back} == {k.canonical() for k, _ in entries}
    by_key = {k.canonical(): [p.value for p in pts] for k, pts in back}
    assert by_key[key_a.canonical()] == [1.0, 2.0]


def test_malformed_json_reports_offset():
    with pytest.raises(MalformedJson) as exc:
        parse_metric_json(b'{"metric_name": "x", ')
    assert exc.value.offset is not None


def test_schema_violations_name_paths():
    with pytest.raises(SchemaViolation) as exc:
        parse_metric_json(b'[1, 2]')
    assert exc.value.path == "$"

    with pytest.raises(SchemaViolation) as exc:
        parse_metric_json(json.dumps({"timeseries": []}).encode())
    assert "metric_name" in exc.value.path

    bad = json.dumps({"metric_name": "x", "timeseries": [{"dimension": "d"}]}).encode()
    with pytest.raises(SchemaViolation) as exc:
        parse_metric_json(bad)
    assert exc.value.path.startswith("$.timeseries[0]")


def test_bad_timestamp_is_schema_violation():
    doc = _doc([{"timestamp": "not a time", "value": 1.0}])
    with pytest.raises(SchemaViolation):
        parse_metric_json(doc)


def test_load_electricity(tmp_path):
    path = str(tmp_path / "LD.txt")
    write_electricity_file(path, n_customers=5, n_days=2, seed=1)
    series = load_electricity(path, window_hours=24, max_customers=3)
    assert len(series) == 3
    for s in series:
        assert len(s.values) == 24
        assert s.interval == timedelta(hours=1)
        assert all(v is not None and v >= 0.0 for v in s.values)


def test_load_electricity_short_file(tmp_path):
    path = str(tmp_path / "LD.txt")
    write_electricity_file(path, n_customers=2, n_days=1, seed=1)
    with pytest.raises(ShortFile):
        load_electricity(path, window_hours=100, max_customers=2)


def test_load_electricity_rejects_point_decimals(tmp_path):
    path = tmp_path / "LD.txt"
    path.write_text('"";"MT_001"\n"2026-01-05 00:15:00";1.5\n')
    with pytest.raises(FormatError):
        load_electricity(str(path), window_hours=1, max_customers=1)
