"""Dilated causal convolution predictor with a Gaussian head.

Stacked causal convolutions (kernel 2, doubling dilations) give an
exponentially wide receptive field at linear cost; tanh activations and
residual hops keep gradients usable at this depth. Two linear heads read
the top feature map: one for the predicted mean, one for log standard
deviation (clamped so sigma can neither explode nor collapse to zero).

Training is one-step-ahead teacher forcing under the Gaussian negative
log-likelihood, plain SGD with global-norm gradient clipping. Everything
is float64 numpy; forward and backward are written out by hand, which
keeps the model dependency-free and makes the gradient checkable against
finite differences.

All convolutions pad on the left only, so the output at position t is a
function of inputs at positions <= t. Standardization statistics are
frozen per series at fit time; a series never seen in training falls back
to statistics of the prediction context itself.
"""

from __future__ import annotations

import math
import time
from typing import Optional, Sequence

import numpy as np

from ..errors import ContextTooShort, EmptyInput, NonFiniteLoss, OutOfRange, SeriesTooShort
from ..series import RegularSeries
from .base import (
    ForecastModel,
    GaussianForecast,
    TrainConfig,
    TrainReport,
    dense_values,
    register_model_kind,
)

__all__ = ["ConvNetForecaster"]

LOG_SIGMA_CLAMP = 10.0
SIGMA_FLOOR_REL = 1e-6
STD_FLOOR = 1e-8


def _shift(h: np.ndarray, s: int) -> np.ndarray:
    """out[..., t] = h[..., t - s], zero-padded on the left."""
    if s == 0:
        return h
    out = np.zeros_like(h)
    out[..., s:] = h[..., :-s]
    return out


def _unshift_add(acc: np.ndarray, g: np.ndarray, s: int) -> None:
    """acc[..., t] += g[..., t + s] (adjoint of _shift)."""
    if s == 0:
        acc += g
    else:
        acc[..., :-s] += g[..., s:]


@register_model_kind
class ConvNetForecaster(ForecastModel):
    kind = "conv_net"

    def __init__(self, config: Optional[TrainConfig] = None):
        self.config = config or TrainConfig()
        self._stats: dict = {}
        self._global_stats: Optional[tuple] = None
        self._trained = False
        self.params = self._init_params()

    # -- parameters -----------------------------------------------------------

    def _init_params(self) -> dict:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        params: dict = {}
        c_in = 1
        for i in range(len(cfg.dilations)):
            fan_in = c_in * cfg.kernel_size
            params[f"W{i}"] = rng.normal(0.0, 1.0 / math.sqrt(fan_in),
                                         size=(cfg.channels, c_in, cfg.kernel_size))
            params[f"b{i}"] = np.zeros(cfg.channels)
            c_in = cfg.channels
        head_scale = 1.0 / math.sqrt(cfg.channels)
        params["w_mu"] = rng.normal(0.0, head_scale, size=cfg.channels)
        params["b_mu"] = np.zeros(1)
        params["w_ls"] = rng.normal(0.0, head_scale, size=cfg.channels)
        params["b_ls"] = np.zeros(1)
        return params

    # -- forward / backward ----------------------------------------------------

    def _forward(self, x: np.ndarray):
        """Returns (mu, ls, cache) over all positions of standardized x."""
        cfg = self.config
        k = cfg.kernel_size
        h = x[None, :]
        hs = [h]
        acts = []
        for i, d in enumerate(cfg.dilations):
            W = self.params[f"W{i}"]
            b = self.params[f"b{i}"]
            pre = np.tile(b[:, None], (1, h.shape[1]))
            for j in range(k):
                pre += np.einsum("oi,it->ot", W[:, :, j], _shift(h, (k - 1 - j) * d))
            a = np.tanh(pre)
            h = a + hs[-1] if hs[-1].shape[0] == a.shape[0] else a
            acts.append(a)
            hs.append(h)
        mu = self.params["w_mu"] @ h + self.params["b_mu"][0]
        ls_raw = self.params["w_ls"] @ h + self.params["b_ls"][0]
        ls = np.clip(ls_raw, -LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP)
        return mu, ls, (hs, acts, ls_raw)

    def loss_and_grads(self, x: np.ndarray):
        """Mean one-step NLL over valid positions, with exact gradients.

        Valid positions t run from receptive_field - 1 through T - 2; each
        predicts x[t + 1]. x must be in standardized units.
        """
        cfg = self.config
        rf = cfg.receptive_field
        T = x.size
        n_valid = T - rf
        if n_valid < 1:
            raise SeriesTooShort(f"{T} slots leave no teacher-forcing target past "
                                 f"receptive field {rf}")

        mu, ls, (hs, acts, ls_raw) = self._forward(x)
        y = np.zeros(T)
        y[: T - 1] = x[1:]
        w = np.zeros(T)
        w[rf - 1 : T - 1] = 1.0 / n_valid

        e2 = np.exp(-2.0 * ls)
        r = y - mu
        loss = float(np.sum(w * (0.5 * math.log(2.0 * math.pi) + ls + 0.5 * r * r * e2)))

        clip_mask = (np.abs(ls_raw) < LOG_SIGMA_CLAMP).astype(np.float64)
        dmu = -r * e2 * w
        dls = (1.0 - r * r * e2) * w * clip_mask

        grads: dict = {}
        h_top = hs[-1]
        grads["w_mu"] = h_top @ dmu
        grads["b_mu"] = np.array([dmu.sum()])
        grads["w_ls"] = h_top @ dls
        grads["b_ls"] = np.array([dls.sum()])
        dh = (self.params["w_mu"][:, None] * dmu[None, :]
              + self.params["w_ls"][:, None] * dls[None, :])

        k = cfg.kernel_size
        for i in reversed(range(len(cfg.dilations))):
            d = cfg.dilations[i]
            W = self.params[f"W{i}"]
            h_prev = hs[i]
            a = acts[i]
            residual = h_prev.shape[0] == a.shape[0]
            dpre = dh * (1.0 - a * a)
            dh_prev = dh.copy() if residual else np.zeros_like(h_prev)
            dW = np.zeros_like(W)
            for j in range(k):
                s = (k - 1 - j) * d
                dW[:, :, j] = np.einsum("ot,it->oi", dpre, _shift(h_prev, s))
                _unshift_add(dh_prev, np.einsum("oi,ot->it", W[:, :, j], dpre), s)
            grads[f"W{i}"] = dW
            grads[f"b{i}"] = dpre.sum(axis=1)
            dh = dh_prev
        return loss, grads

    def _sgd_step(self, grads: dict) -> None:
        cfg = self.config
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        scale = cfg.grad_clip / norm if norm > cfg.grad_clip else 1.0
        for name, g in grads.items():
            self.params[name] -= cfg.learning_rate * scale * g

    # -- training ---------------------------------------------------------------

    @staticmethod
    def _series_stats(x: np.ndarray) -> tuple:
        return float(np.mean(x)), max(float(np.std(x)), STD_FLOOR)

    def fit(self, series: Sequence[RegularSeries]) -> TrainReport:
        cfg = self.config
        if not series:
            raise EmptyInput("no series to fit")
        t0 = time.monotonic()

        prepared = []
        all_values = []
        for s in series:
            x = dense_values(s)
            if x.size > cfg.context_length:
                x = x[-cfg.context_length:]
            if x.size < cfg.receptive_field + 1:
                raise SeriesTooShort(
                    f"series {s.key.canonical()!r} has {x.size} slots, need "
                    f"{cfg.receptive_field + 1}"
                )
            mean, std = self._series_stats(x)
            self._stats[s.key.canonical()] = (mean, std)
            prepared.append((x - mean) / std)
            all_values.append(x)
        pooled = np.concatenate(all_values)
        self._global_stats = self._series_stats(pooled)

        curve = []
        for _ in range(cfg.epochs):
            epoch_losses = []
            for x in prepared:
                loss, grads = self.loss_and_grads(x)
                if not math.isfinite(loss):
                    raise NonFiniteLoss(f"training loss became {loss}")
                self._sgd_step(grads)
                epoch_losses.append(loss)
            curve.append(float(np.mean(epoch_losses)))
        self._trained = True
        return TrainReport(
            epochs_run=cfg.epochs,
            final_loss=curve[-1],
            n_series=len(series),
            wall_time_s=time.monotonic() - t0,
            loss_curve=tuple(curve),
        )

    # -- inference -----------------------------------------------------------------

    def _stats_for(self, context: RegularSeries, x: np.ndarray) -> tuple:
        stats = self._stats.get(context.key.canonical())
        if stats is not None:
            return stats
        if self._global_stats is not None:
            return self._global_stats
        return self._series_stats(x)

    def predict(self, context: RegularSeries, horizon: int) -> GaussianForecast:
        cfg = self.config
        if horizon < 1:
            raise OutOfRange(f"horizon must be >= 1, got {horizon}", field="horizon")
        x = dense_values(context)
        rf = cfg.receptive_field
        if x.size < rf:
            raise ContextTooShort(f"context has {x.size} slots, receptive field is {rf}")
        mean, std = self._stats_for(context, x)
        floor = SIGMA_FLOOR_REL * max(1.0, float(np.max(np.abs(x))))

        seq = list((x - mean) / std)
        mu_out = []
        sigma_out = []
        for _ in range(horizon):
            window = np.asarray(seq[-rf:])
            mu, ls, _ = self._forward(window)
            m = float(mu[-1])
            s = float(np.exp(ls[-1]))
            mu_out.append(m * std + mean)
            sigma_out.append(max(s * std, floor))
            seq.append(m)
        return GaussianForecast(mu=tuple(mu_out), sigma=tuple(sigma_out))

    def one_step_scan(self, context: RegularSeries):
        """Teacher-forced (mu, sigma) per context position, original units.

        Position t is predicted from values strictly before it, so this is
        the in-sample reconstruction path. The first receptive_field
        positions have no fully covered input window and are returned as
        None.
        """
        cfg = self.config
        x = dense_values(context)
        rf = cfg.receptive_field
        if x.size < rf + 1:
            raise ContextTooShort(f"context has {x.size} slots, need {rf + 1}")
        mean, std = self._stats_for(context, x)
        floor = SIGMA_FLOOR_REL * max(1.0, float(np.max(np.abs(x))))
        mu, ls, _ = self._forward((x - mean) / std)
        out = []
        for t in range(x.size):
            if t < rf:
                out.append(None)
            else:
                # Prediction for position t came from the head at t - 1.
                m = float(mu[t - 1]) * std + mean
                s = max(float(np.exp(ls[t - 1])) * std, floor)
                out.append((m, s))
        return out

    # -- persistence ------------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "stats": {k: list(v) for k, v in sorted(self._stats.items())},
            "global_stats": None if self._global_stats is None else list(self._global_stats),
            "trained": self._trained,
            "params": {name: p.tolist() for name, p in sorted(self.params.items())},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConvNetForecaster":
        model = cls(TrainConfig.from_json(obj["config"]))
        model._stats = {str(k): (float(v[0]), float(v[1])) for k, v in obj["stats"].items()}
        gs = obj.get("global_stats")
        model._global_stats = None if gs is None else (float(gs[0]), float(gs[1]))
        model._trained = bool(obj["trained"])
        for name, flat in obj["params"].items():
            model.params[name] = np.asarray(flat, dtype=np.float64)
        return model
