import math

import numpy as np
import pytest

from sentinel.errors import ContextTooShort, EmptyInput, SeriesTooShort
from sentinel.forecast import (
    ConvNetForecaster,
    SeasonalNaiveForecaster,
    TrainConfig,
    load_model,
    save_model,
)
from sentinel.forecast.base import GaussianForecast, standardized_residuals

from conftest import daily_cycle, hourly_series

# Small enough to train in well under a second, deep enough to be a real
# dilation stack.
TOY = TrainConfig(context_length=64, channels=4, dilations=(1, 2, 4),
                  epochs=3, seed=1)


def test_seasonal_predicts_one_period_back():
    values = daily_cycle(96, seed=1)
    model = SeasonalNaiveForecaster(period=24)
    model.fit([hourly_series(values)])
    fc = model.predict(hourly_series(values), horizon=3)
    assert list(fc.mu) == values[72:75]
    assert all(s > 0 for s in fc.sigma)


def test_seasonal_scan_convention():
    values = daily_cycle(50, seed=2)
    model = SeasonalNaiveForecaster(period=24)
    model.fit([hourly_series(values)])
    scan = model.one_step_scan(hourly_series(values))
    assert len(scan) == 50
    assert all(entry is None for entry in scan[:24])
    # position t is predicted from strictly earlier values
    mu, sigma = scan[24]
    assert mu == values[0]
    assert sigma > 0


def test_seasonal_short_context():
    model = SeasonalNaiveForecaster(period=24)
    model.fit([hourly_series(daily_cycle(48))])
    with pytest.raises(ContextTooShort):
        model.one_step_scan(hourly_series([1.0] * 10))


def test_seasonal_save_load_round_trip(tmp_path):
    values = daily_cycle(96, seed=3)
    model = SeasonalNaiveForecaster(period=24)
    model.fit([hourly_series(values)])
    path = str(tmp_path / "m.json")
    save_model(model, path)
    back = load_model(path)
    assert isinstance(back, SeasonalNaiveForecaster)
    a = model.predict(hourly_series(values), 5)
    b = back.predict(hourly_series(values), 5)
    assert list(a.mu) == list(b.mu)
    assert list(a.sigma) == list(b.sigma)


def test_conv_training_reduces_loss():
    values = daily_cycle(64, seed=4, noise=0.5)
    model = ConvNetForecaster(TOY)
    report = model.fit([hourly_series(values)])
    assert report.epochs_run == 3
    assert report.loss_curve[-1] < report.loss_curve[0]


def test_conv_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    model = ConvNetForecaster(TOY)
    x = rng.standard_normal(24)
    _, grads = model.loss_and_grads(x)
    eps = 1e-6
    for name in ("W0", "b1", "w_mu", "b_ls"):
        p = model.params[name]
        idx = tuple(0 for _ in p.shape)
        p[idx] += eps
        up, _ = model.loss_and_grads(x)
        p[idx] -= 2 * eps
        down, _ = model.loss_and_grads(x)
        p[idx] += eps
        numeric = (up - down) / (2 * eps)
        analytic = grads[name][idx]
        assert math.isclose(analytic, numeric, rel_tol=1e-4, abs_tol=1e-8), name


def test_conv_is_causal():
    """Perturbing the input at position t must not change predictions for
    positions at or before t."""
    rng = np.random.default_rng(1)
    model = ConvNetForecaster(TOY)
    x = rng.standard_normal(40)
    mu_a, ls_a, _ = model._forward(x)
    bumped = x.copy()
    bumped[30] += 100.0
    mu_b, ls_b, _ = model._forward(bumped)
    assert np.allclose(mu_a[:30], mu_b[:30])
    assert np.allclose(ls_a[:30], ls_b[:30])
    assert not np.allclose(mu_a[30:], mu_b[30:])


def test_conv_scan_convention():
    values = daily_cycle(40, seed=5)
    model = ConvNetForecaster(TOY)
    model.fit([hourly_series(values)])
    scan = model.one_step_scan(hourly_series(values))
    rf = TOY.receptive_field
    assert len(scan) == 40
    assert all(entry is None for entry in scan[:rf])
    assert all(entry is not None and entry[1] > 0 for entry in scan[rf:])


def test_conv_save_load_round_trip(tmp_path):
    values = daily_cycle(64, seed=6)
    model = ConvNetForecaster(TOY)
    model.fit([hourly_series(values)])
    path = str(tmp_path / "m.json")
    save_model(model, path)
    back = load_model(path)
    assert isinstance(back, ConvNetForecaster)
    ctx = hourly_series(values)
    assert np.allclose(model.predict(ctx, 4).mu, back.predict(ctx, 4).mu)


def test_conv_rejects_short_series():
    model = ConvNetForecaster(TOY)
    with pytest.raises(SeriesTooShort):
        model.fit([hourly_series([1.0] * 5)])
    with pytest.raises(EmptyInput):
        model.fit([])


def test_standardized_residuals():
    fc = GaussianForecast(mu=(10.0, 10.0, 10.0), sigma=(2.0, 2.0, 2.0))
    res = standardized_residuals([14.0, None, 8.0], fc)
    assert res == [2.0, None, -1.0]
