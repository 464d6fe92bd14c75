"""Window funnel, injection harness, and evaluation metric tests."""

import json
from datetime import timedelta

import numpy as np
import pytest

from sentinel.errors import EmptyWindow, LengthMismatch, OutOfRange, SpecTooDense
from sentinel.evt import EvtConfig
from sentinel.forecast.seasonal import SeasonalNaiveForecaster
from sentinel.pipeline import (
    DESK_EVT,
    FunnelReport,
    PipelineConfig,
    electricity_eval,
    imputation_ab,
    inject_anomalies,
    precision_recall,
    quantile_sweep,
    run_window,
    sweep_evt,
    window_id_for,
)
from sentinel.records import Tier
from sentinel.series import ImputationPolicy
from sentinel.synthetic import (
    sinusoid_series_set,
    student_t_scores,
    write_electricity_file,
)
from sentinel.timeutil import parse_rfc3339

from conftest import HOUR, START, daily_cycle, hourly_series


def seasonal_setup(n_series=3, hours=192, spike_positions=(180,), spike=60.0):
    """Daily-cycle series with hard spikes in the last day."""
    series = []
    for i in range(n_series):
        values = daily_cycle(hours, seed=i)
        if i == 0:
            values = list(values)
            for p in spike_positions:
                values[p] += spike
            values = tuple(values)
        series.append(hourly_series(values, i=i))
    model = SeasonalNaiveForecaster(period=24)
    model.fit([s.slice_time(START, START + (hours - 24) * HOUR) for s in series])
    return series, model


def test_window_id_format():
    assert window_id_for(parse_rfc3339("2026-01-12T23:00:00Z")) == "20260112T230000Z"


def context_calibration(series, model, w_start):
    """In-sample one-step scores over each series' context, pooled."""
    out = []
    for s in series:
        ctx = s.slice_time(START, w_start)
        scan = model.one_step_scan(ctx)
        for v, ms in zip(ctx.values, scan):
            if v is None or ms is None:
                continue
            mu, sigma = ms
            out.append(abs(v - mu) / sigma)
    return out


def test_run_window_funnel_invariants():
    series, model = seasonal_setup()
    w_start = START + 168 * HOUR
    w_end = START + 192 * HOUR
    config = PipelineConfig(evt=EvtConfig(risk_q=1e-3, init_quantile=0.9, min_excesses=20))
    # a lone spike would dominate a 72-point window fit; calibrate on the
    # clean context scores the way the service does
    calibration = context_calibration(series, model, w_start)
    result = run_window(series, model, w_start, w_end, config,
                        calibration_scores=calibration)

    f = result.funnel
    assert f.points_total == 3 * 24
    assert f.high_count + f.low_count == f.stage1_count
    assert f.stage1_count <= f.points_total
    assert f.series_seen == 3 and f.series_skipped == 0
    assert len(result.scores) == f.points_total
    assert len(result.records) == f.stage1_count

    # the 15-sigma-ish spike must land in the extreme tier
    highs = [r for r in result.records if r.tier is Tier.HIGH]
    assert any(r.timestamp == START + 180 * HOUR for r in highs)
    # every record carries the threshold it was judged against
    for r in result.records:
        assert r.z_q_at_detection == pytest.approx(f.z_q)
        if r.tier is Tier.HIGH:
            assert r.score > f.z_q
        else:
            assert r.score <= f.z_q


def test_run_window_records_sorted():
    series, model = seasonal_setup(spike_positions=(170, 180, 175))
    config = PipelineConfig(evt=EvtConfig(risk_q=1e-3, init_quantile=0.8, min_excesses=10))
    result = run_window(series, model, START + 168 * HOUR, START + 192 * HOUR, config)
    stamps = [r.timestamp for r in result.records]
    assert stamps == sorted(stamps)


def test_run_window_calibration_sample_is_used():
    series, model = seasonal_setup()
    config = PipelineConfig(evt=EvtConfig(risk_q=1e-3, init_quantile=0.9, min_excesses=20))
    calibration = [float(v) for v in student_t_scores(2000, df=3.0, seed=4)]
    result = run_window(
        series, model, START + 168 * HOUR, START + 192 * HOUR, config,
        calibration_scores=calibration,
    )
    assert result.fit is not None
    # the tail was fit on the calibration batch, not the 72 window scores
    assert result.fit.n_total == 2000


def test_run_window_empty_and_reversed():
    series, model = seasonal_setup()
    with pytest.raises(EmptyWindow):
        run_window(series, model, START + 192 * HOUR, START + 168 * HOUR,
                   PipelineConfig())
    # a window past the end of every series has no observed points
    with pytest.raises(EmptyWindow):
        run_window(series, model, START + 500 * HOUR, START + 524 * HOUR,
                   PipelineConfig())


def test_run_window_skips_contextless_series():
    series, model = seasonal_setup(n_series=2)
    # third series begins exactly at the window start: no context at all
    late = hourly_series(daily_cycle(24, seed=9), i=7, start=START + 168 * HOUR)
    # 48 window scores: the initial cut must leave ten excesses in reach
    config = PipelineConfig(evt=EvtConfig(risk_q=1e-3, init_quantile=0.7, min_excesses=10))
    result = run_window(series + [late], model, START + 168 * HOUR,
                        START + 192 * HOUR, config)
    assert result.funnel.series_seen == 3
    assert result.funnel.series_skipped == 1
    assert result.funnel.points_total == 2 * 24


def funnel_kwargs(**over):
    base = dict(
        window_id="20260105T000000Z", points_total=100, stage1_count=10,
        high_count=3, low_count=7, series_seen=5, series_skipped=0,
        risk_q=1e-4, z_q=6.0, gamma=0.1, sigma=1.2, threshold_t=3.0,
        n_exceed=40, score_space="abs_sigma", wall_time_s=0.5,
    )
    base.update(over)
    return base


def test_funnel_report_validates_partition():
    with pytest.raises(OutOfRange):
        FunnelReport(**funnel_kwargs(high_count=4))
    with pytest.raises(OutOfRange):
        FunnelReport(**funnel_kwargs(stage1_count=101, high_count=50, low_count=51))
    with pytest.raises(OutOfRange):
        FunnelReport(**funnel_kwargs(points_total=-1))


def test_funnel_report_canonical_bytes_ignore_wall_time():
    a = FunnelReport(**funnel_kwargs(wall_time_s=0.1))
    b = FunnelReport(**funnel_kwargs(wall_time_s=9.9))
    assert a.canonical_bytes() == b.canonical_bytes()
    assert b"wall_time" not in a.canonical_bytes()
    back = FunnelReport.from_json(json.loads(json.dumps(a.to_json())))
    assert back == a


def test_inject_anomalies_positions_and_magnitude():
    values = daily_cycle(400, seed=2, noise=2.0)
    s = hourly_series(values)
    out = inject_anomalies(s, count=5, magnitude_sigma=10.0, seed=1, lo=200, hi=400)
    assert len(out.positions) == 5
    assert all(200 <= p < 400 for p in out.positions)
    for p in out.positions:
        bump = out.series.values[p] - s.values[p]
        # 10 local deviations of noise ~ N(0, 2): roughly 20, generously bounded
        assert 8.0 < bump < 80.0
    # untouched slots are identical
    untouched = set(range(400)) - set(out.positions)
    for i in untouched:
        assert out.series.values[i] == s.values[i]


def test_inject_anomalies_explicit_positions():
    s = hourly_series(daily_cycle(200, seed=0))
    out = inject_anomalies(s, positions=[50, 150], magnitude_sigma=5.0)
    assert out.positions == (50, 150)
    with pytest.raises(OutOfRange):
        inject_anomalies(s, positions=[500], magnitude_sigma=5.0)


def test_inject_anomalies_refuses_gap_target():
    values = list(daily_cycle(100, seed=0))
    values[40] = None
    s = hourly_series(tuple(values))
    with pytest.raises(OutOfRange):
        inject_anomalies(s, positions=[40], magnitude_sigma=5.0)


def test_inject_anomalies_density_guard():
    s = hourly_series(daily_cycle(100, seed=0))
    with pytest.raises(SpecTooDense):
        inject_anomalies(s, count=10, magnitude_sigma=5.0, seed=0)
    with pytest.raises(OutOfRange):
        inject_anomalies(s)  # neither count nor positions


def test_precision_recall_edges():
    empty = precision_recall(set(), {(0, 1)})
    assert empty.precision == 1.0 and empty.recall == 0.0
    assert empty.false_negatives == 1

    no_truth = precision_recall({(0, 1)}, set())
    assert no_truth.recall == 1.0 and no_truth.precision == 0.0

    mixed = precision_recall({(0, 1), (0, 2)}, {(0, 1), (0, 3)})
    assert mixed.true_positives == 1
    assert mixed.false_positives == 1
    assert mixed.false_negatives == 1
    assert mixed.precision == 0.5 and mixed.recall == 0.5


def test_quantile_sweep_monotone_counts():
    scores = [float(v) for v in student_t_scores(20000, df=3.0, seed=8)]
    config = EvtConfig(risk_q=1e-4, init_quantile=0.95, min_excesses=50)
    rows = quantile_sweep(scores, config, [0.99, 0.995, 0.998, 0.9995])
    counts = [r["high_count"] for r in rows]
    zs = [r["z_q"] for r in rows]
    assert counts == sorted(counts, reverse=True)
    assert zs == sorted(zs)
    assert rows[0]["risk_q"] == pytest.approx(0.01)


def test_quantile_sweep_rejects_bad_quantile():
    scores = [float(v) for v in student_t_scores(5000, df=3.0, seed=8)]
    config = EvtConfig(risk_q=1e-4, init_quantile=0.9, min_excesses=30)
    for bad in (0.4, 0.5, 1.0, 1.5):
        with pytest.raises(OutOfRange):
            quantile_sweep(scores, config, [bad])


def test_sweep_evt_adapts_init_quantile():
    config = EvtConfig(risk_q=1e-4, init_quantile=0.98, min_excesses=30)
    # plenty of data: capped at 0.9
    assert sweep_evt(config, 100000).init_quantile == 0.9
    # tiny sample: floored at 0.5
    assert sweep_evt(config, 40).init_quantile == 0.5
    # mid-size sample leaves at least min_excesses + 1 above the cut
    mid = sweep_evt(config, 288)
    assert 0.5 <= mid.init_quantile <= 0.9
    assert (1.0 - mid.init_quantile) * 288 >= 30
    # other fields unchanged
    assert mid.risk_q == config.risk_q
    assert mid.min_excesses == config.min_excesses


def test_imputation_ab_prefers_median_on_positive_signal():
    gapped, truth = sinusoid_series_set(10, 400, seed=5, gap_fraction=0.2)
    out = imputation_ab(gapped, truth)
    assert set(out) == {ImputationPolicy.ZERO, ImputationPolicy.MEDIAN}
    assert out[ImputationPolicy.MEDIAN] < out[ImputationPolicy.ZERO]


def test_imputation_ab_length_mismatch():
    gapped, truth = sinusoid_series_set(2, 100, seed=5)
    with pytest.raises(LengthMismatch):
        imputation_ab(gapped, truth[:1])


def test_electricity_eval_smoke(tmp_path):
    path = write_electricity_file(str(tmp_path / "load.txt"), 5, 5, seed=3)
    config = PipelineConfig(evt=EvtConfig(risk_q=1e-4, init_quantile=0.9, min_excesses=20))
    run = electricity_eval(
        path, n_customers=5, context_hours=72, detect_hours=24,
        n_spikes=4, spike_sigma=12.0, n_decoys=2, seed=11, config=config,
    )
    assert len(run.truth) == 4 and len(run.decoys) == 2
    assert run.truth.isdisjoint(run.decoys)
    e = run.eval
    assert e.true_positives + e.false_negatives == 4
    f = run.result.funnel
    assert f.high_count + f.low_count == f.stage1_count
    # big spikes on a strongly periodic signal: the tier should find most
    assert e.recall >= 0.5


def test_desk_evt_profile_values():
    assert DESK_EVT.risk_q == pytest.approx(5e-5)
    assert DESK_EVT.init_quantile == pytest.approx(0.98)
    assert DESK_EVT.min_excesses == 30
