"""Importance-sampling estimators, effective sample size and confidence bounds.

Weights are always passed as log-weights. Estimators take parallel arrays
``log_weights`` and ``values``; ``WeightedSample.stack`` converts a list of
records into that form.
"""
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp


class DegenerateWeightsError(ValueError):
    """All importance weights vanish, so self-normalization is undefined."""


@dataclass(frozen=True)
class WeightedSample:
    log_weight: float
    value: float

    @staticmethod
    def stack(samples: Sequence["WeightedSample"]):
        log_w = np.array([s.log_weight for s in samples], dtype=float)
        values = np.array([s.value for s in samples], dtype=float)
        return log_w, values


@dataclass(frozen=True)
class BoundConfig:
    """Confidence level ``1 - delta``, sup-norm of the integrand and sample size."""

    delta: float
    f_inf: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.f_inf < 0:
            raise ValueError(f"f_inf must be non-negative, got {self.f_inf}")
        if self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")


def _check(log_weights, values=None):
    log_w = np.asarray(log_weights, dtype=float).ravel()
    if log_w.size == 0:
        raise ValueError("at least one sample is required")
    if values is None:
        return log_w
    f = np.asarray(values, dtype=float).ravel()
    if f.shape != log_w.shape:
        raise ValueError(f"{log_w.size} weights but {f.size} values")
    return log_w, f


def normalized_weights(log_weights) -> np.ndarray:
    """Self-normalized weights, computed after subtracting the max log-weight."""
    log_w = _check(log_weights)
    top = np.max(log_w)
    if not np.isfinite(top):
        raise DegenerateWeightsError("all importance weights are zero")
    w = np.exp(log_w - top)
    return w / np.sum(w)


def is_estimate(log_weights, values) -> float:
    """Plain importance-sampling mean ``(1/N) sum w_i f_i``."""
    log_w, f = _check(log_weights, values)
    return float(np.mean(np.exp(log_w) * f))


def sn_estimate(log_weights, values) -> float:
    """Self-normalized estimate ``sum w~_i f_i``; lies in ``[min f, max f]``."""
    log_w, f = _check(log_weights, values)
    est = float(np.dot(normalized_weights(log_w), f))
    return min(max(est, float(np.min(f))), float(np.max(f)))


def ess_exact(n: int, d2: float) -> float:
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not d2 >= 1.0:
        raise ValueError(f"d2 must be at least 1, got {d2}")
    return n / d2


def ess_estimate(log_weights) -> float:
    """``1 / sum w~_i**2``, in ``[1, N]``."""
    w_tilde = normalized_weights(log_weights)
    ess = 1.0 / float(np.sum(w_tilde**2))
    return min(max(ess, 1.0), float(w_tilde.size))


def weight_variance(log_weights) -> float:
    """Population variance of the raw (unnormalized) weights."""
    return float(np.var(np.exp(_check(log_weights))))


def log_mean_exp(log_values) -> float:
    log_values = _check(log_values)
    return float(logsumexp(log_values) - math.log(log_values.size))


def is_variance_bound(cfg: BoundConfig, d2: float) -> float:
    """Upper bound ``f_inf**2 * d2 / N`` on the variance of the IS estimator."""
    return cfg.f_inf**2 * d2 / cfg.n


def lambda_from_delta(cfg: BoundConfig) -> float:
    return cfg.f_inf * math.sqrt((1.0 - cfg.delta) / cfg.delta)


def is_lower_bound(point_estimate: float, cfg: BoundConfig, d2: float) -> float:
    """One-sided ``1 - delta`` lower bound on the target mean from an IS estimate."""
    return point_estimate - lambda_from_delta(cfg) * math.sqrt(d2 / cfg.n)


def sn_bias_bound(cfg: BoundConfig, d2: float) -> float:
    return cfg.f_inf * min(2.0, math.sqrt(max(d2 - 1.0, 0.0) / cfg.n))


def sn_mse_bound(cfg: BoundConfig, d2: float) -> float:
    return 2.0 * cfg.f_inf**2 * min(2.0, (2.0 * d2 - 1.0) / cfg.n)


def sn_lower_bound(point_estimate: float, cfg: BoundConfig, d2: float) -> float:
    """One-sided ``1 - delta`` lower bound from a self-normalized estimate.

    The penalty is capped at ``2 * f_inf``, the range of the SN estimator.
    """
    width = math.sqrt(d2 * (4.0 - 3.0 * cfg.delta) / (cfg.delta * cfg.n))
    return point_estimate - 2.0 * cfg.f_inf * min(1.0, width)
