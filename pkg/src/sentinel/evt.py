"""Extreme-value tail modelling over anomaly scores.

Peak-over-threshold: pick an initial threshold ``t`` from an empirical
quantile of the scores, fit a generalized Pareto to the excesses above
``t``, then convert a target risk (probability of a false exceedance) into
a final threshold ``z_q``. Scores beyond ``z_q`` sit in the extreme tier;
scores between ``t`` and ``z_q`` are ordinary tail members.

The quantile-to-threshold map is

    z_q = t + (sigma/gamma) * ((risk * n / n_exceed)^(-gamma) - 1)

with the gamma -> 0 limit ``t - sigma * log(risk * n / n_exceed)``. Its
guarantee is P(X > z_q) < risk for samples drawn like the fitted tail.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateSample,
    InsufficientSample,
    OutOfRange,
    ScoreSpaceMismatch,
    TooFewExcesses,
)

__all__ = [
    "FitMethod",
    "EvtConfig",
    "GpdFit",
    "fit_gpd",
    "gpd_quantile_threshold",
    "pot_threshold",
    "exceeds",
    "gpd_sample",
]

# Profile-variable bisection stops when the bracket is this tight.
ROOT_TOL = 1e-10
GRID_POINTS = 64
# |gamma| below this is treated as the exponential limit.
GAMMA_EPS = 1e-12


class FitMethod(enum.Enum):
    GRIMSHAW = "grimshaw"
    MOMENT_MATCHING = "moment_matching"


@dataclass(frozen=True)
class EvtConfig:
    """Tail-model settings.

    risk_q: target probability of flagging a normal point as extreme.
    init_quantile: empirical quantile that seeds the initial threshold.
    min_excesses: smallest excess count the fit will accept.
    """

    risk_q: float = 0.002
    init_quantile: float = 0.98
    min_excesses: int = 30
    fit_method: FitMethod = FitMethod.GRIMSHAW

    def __post_init__(self):
        if not (0.0 < self.risk_q < 0.5):
            raise OutOfRange(f"risk_q must be in (0, 0.5), got {self.risk_q}", field="risk_q")
        if not (0.0 < self.init_quantile < 1.0):
            raise OutOfRange(
                f"init_quantile must be in (0, 1), got {self.init_quantile}",
                field="init_quantile",
            )
        if self.min_excesses < 10:
            raise OutOfRange(
                f"min_excesses must be at least 10, got {self.min_excesses}",
                field="min_excesses",
            )


@dataclass(frozen=True)
class GpdFit:
    """A fitted tail and the threshold it implies.

    gamma/sigma parameterize the excess distribution above ``threshold_t``;
    ``z_q`` is the final cut for ``risk_q``. ``score_space`` names the score
    the fit was computed in so it cannot be applied to a different one.
    """

    gamma: float
    sigma: float
    threshold_t: float
    z_q: float
    risk_q: float
    n_total: int
    n_exceed: int
    method: FitMethod
    score_space: str
    log_likelihood: float

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "sigma": self.sigma,
            "threshold_t": self.threshold_t,
            "z_q": self.z_q,
            "risk_q": self.risk_q,
            "n_total": self.n_total,
            "n_exceed": self.n_exceed,
            "method": self.method.value,
            "score_space": self.score_space,
            "log_likelihood": self.log_likelihood,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GpdFit":
        return cls(
            gamma=float(obj["gamma"]),
            sigma=float(obj["sigma"]),
            threshold_t=float(obj["threshold_t"]),
            z_q=float(obj["z_q"]),
            risk_q=float(obj["risk_q"]),
            n_total=int(obj["n_total"]),
            n_exceed=int(obj["n_exceed"]),
            method=FitMethod(obj["method"]),
            score_space=str(obj["score_space"]),
            log_likelihood=float(obj["log_likelihood"]),
        )


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _gpd_log_likelihood(y: np.ndarray, gamma: float, sigma: float) -> float:
    n = y.size
    if sigma <= 0.0:
        return -math.inf
    if abs(gamma) < GAMMA_EPS:
        return -n * math.log(sigma) - float(np.sum(y)) / sigma
    z = 1.0 + (gamma / sigma) * y
    if np.any(z <= 0.0):
        return -math.inf
    return -n * math.log(sigma) - (1.0 + 1.0 / gamma) * float(np.sum(np.log(z)))


def _profile_w(x: float, y: np.ndarray) -> float:
    """Stationarity residual of the profiled likelihood at x = gamma/sigma.

    With u(x) = 1 + mean(log(1 + x*y)) and v(x) = mean(1 / (1 + x*y)) the
    maximum satisfies u(x) * v(x) = 1.
    """
    z = 1.0 + x * y
    u = 1.0 + float(np.mean(np.log(z)))
    v = float(np.mean(1.0 / z))
    return u * v - 1.0


def _params_at(x: float, y: np.ndarray):
    gamma = float(np.mean(np.log1p(x * y)))
    sigma = gamma / x
    return gamma, sigma


def _bisect(f, a: float, b: float, fa: float, fb: float) -> Optional[float]:
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        return None
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fm == 0.0 or (b - a) <= ROOT_TOL * max(1.0, abs(a) + abs(b)):
            return mid
        if fa * fm < 0.0:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def _grimshaw_candidates(y: np.ndarray) -> list:
    """Roots of the profiled stationarity condition on both sides of zero."""
    y_max = float(np.max(y))
    y_mean = float(np.mean(y))
    roots = []

    # x must stay above -1/y_max so every 1 + x*y is positive.
    x_floor = -1.0 / y_max
    neg_lo = x_floor * (1.0 - 1e-8)
    neg_hi = -1e-9 / y_mean
    pos_lo = 1e-9 / y_mean
    pos_hi = 1e4 / y_mean

    for lo, hi in ((neg_lo, neg_hi), (pos_lo, pos_hi)):
        if not (lo < hi):
            continue
        if lo < 0:
            grid = -np.geomspace(-lo, -hi, GRID_POINTS)
        else:
            grid = np.geomspace(lo, hi, GRID_POINTS)
        vals = np.array([_profile_w(float(g), y) for g in grid])
        for i in range(len(grid) - 1):
            if vals[i] == 0.0:
                roots.append(float(grid[i]))
            elif vals[i] * vals[i + 1] < 0.0:
                r = _bisect(lambda x: _profile_w(x, y), float(grid[i]), float(grid[i + 1]),
                            float(vals[i]), float(vals[i + 1]))
                if r is not None:
                    roots.append(r)
        if vals[-1] == 0.0:
            roots.append(float(grid[-1]))
    return roots


def fit_gpd(excesses: Sequence[float], method: FitMethod = FitMethod.GRIMSHAW):
    """Fit (gamma, sigma) to positive excesses. Returns (gamma, sigma, loglik).

    Grimshaw profiles the likelihood down to one variable and keeps the
    best-scoring stationary point; the exponential (gamma = 0) candidate is
    always in the running, so flat tails degrade gracefully. Moment
    matching is the cheap fallback and is also what the Grimshaw route can
    never silently become: the two are separate code paths on purpose.
    """
    y = np.asarray(excesses, dtype=np.float64)
    if y.size == 0:
        raise DegenerateSample("no excesses to fit")
    if np.any(~np.isfinite(y)) or np.any(y <= 0.0):
        raise DegenerateSample("excesses must be finite and positive")
    if float(np.var(y)) == 0.0:
        raise DegenerateSample("excesses are all identical")

    if method is FitMethod.MOMENT_MATCHING:
        m = float(np.mean(y))
        s2 = float(np.var(y))
        ratio = m * m / s2
        gamma = 0.5 * (1.0 - ratio)
        sigma = 0.5 * m * (1.0 + ratio)
        return gamma, sigma, _gpd_log_likelihood(y, gamma, sigma)

    # Exponential candidate: gamma = 0, sigma = mean.
    best = (0.0, float(np.mean(y)))
    best_ll = _gpd_log_likelihood(y, *best)
    for x in _grimshaw_candidates(y):
        gamma, sigma = _params_at(x, y)
        if sigma <= 0.0 or not math.isfinite(sigma) or not math.isfinite(gamma):
            continue
        ll = _gpd_log_likelihood(y, gamma, sigma)
        if ll > best_ll:
            best, best_ll = (gamma, sigma), ll
    return best[0], best[1], best_ll


# ---------------------------------------------------------------------------
# Threshold arithmetic
# ---------------------------------------------------------------------------


def gpd_quantile_threshold(
    threshold_t: float,
    gamma: float,
    sigma: float,
    risk_q: float,
    n_total: int,
    n_exceed: int,
) -> float:
    """Map a risk target to a score threshold through the fitted tail."""
    if sigma <= 0.0:
        raise OutOfRange(f"sigma must be positive, got {sigma}", field="sigma")
    if risk_q <= 0.0:
        raise OutOfRange(f"risk_q must be positive, got {risk_q}", field="risk_q")
    if n_total <= 0 or n_exceed <= 0:
        raise OutOfRange("sample counts must be positive", field="n_total")

    r = risk_q * n_total / n_exceed
    log_r = math.log(r)
    if abs(gamma) < GAMMA_EPS:
        z = threshold_t - sigma * log_r
    else:
        # (r^-gamma - 1) / gamma via expm1 keeps small-gamma precision.
        z = threshold_t + sigma * math.expm1(-gamma * log_r) / gamma
    if gamma < 0.0:
        # Finite support: excesses cannot pass -sigma/gamma.
        z = min(z, threshold_t - sigma / gamma)
    return z


def _empirical_quantile(scores: np.ndarray, q: float) -> float:
    return float(np.quantile(scores, q))


def pot_threshold(
    scores: Sequence[float],
    config: EvtConfig,
    score_space: str = "abs_std_residual",
) -> GpdFit:
    """Peak-over-threshold calibration over a score sample.

    The sample must be large enough that the initial quantile leaves at
    least ``min_excesses`` points above it in expectation; thin samples
    raise rather than extrapolate from nothing.
    """
    x = np.asarray(scores, dtype=np.float64)
    if np.any(~np.isfinite(x)):
        raise DegenerateSample("scores must be finite")
    n = x.size
    needed = int(math.ceil(config.min_excesses / (1.0 - config.init_quantile)))
    if n < needed:
        raise InsufficientSample(
            f"{n} scores cannot support init_quantile={config.init_quantile} "
            f"with min_excesses={config.min_excesses}; need at least {needed}"
        )
    t = _empirical_quantile(x, config.init_quantile)
    excesses = x[x > t] - t
    if excesses.size < config.min_excesses:
        raise TooFewExcesses(
            f"only {excesses.size} scores exceed t={t:.6g}, need {config.min_excesses}"
        )
    gamma, sigma, ll = fit_gpd(excesses, config.fit_method)
    z_q = gpd_quantile_threshold(t, gamma, sigma, config.risk_q, n, int(excesses.size))
    return GpdFit(
        gamma=gamma,
        sigma=sigma,
        threshold_t=t,
        z_q=z_q,
        risk_q=config.risk_q,
        n_total=int(n),
        n_exceed=int(excesses.size),
        method=config.fit_method,
        score_space=score_space,
        log_likelihood=ll,
    )


def exceeds(score: float, fit: GpdFit, score_space: str) -> bool:
    """True when a score clears the fitted cut. Spaces must match."""
    if score_space != fit.score_space:
        raise ScoreSpaceMismatch(
            f"fit was computed in {fit.score_space!r}, score is in {score_space!r}"
        )
    return score > fit.z_q


# ---------------------------------------------------------------------------
# Sampling (test support)
# ---------------------------------------------------------------------------


def gpd_sample(gamma: float, sigma: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from GPD(gamma, sigma)."""
    u = rng.random(size)
    if abs(gamma) < GAMMA_EPS:
        return -sigma * np.log1p(-u)
    return (sigma / gamma) * (np.power(1.0 - u, -gamma) - 1.0)
