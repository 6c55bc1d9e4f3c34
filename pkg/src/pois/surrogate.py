"""High-confidence surrogate objectives for action- and parameter-based POIS.

Both surrogates have the form ``is_term - penalty`` where ``is_term`` is an IS or
SN estimate of the expected return under the target and ``penalty`` is either
``lam * sqrt(d2 / N)`` ("exact") or ``lam / sqrt(ESS_hat)`` ("ess").
"""
import itertools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from .batch import Batch, Trajectory
from .estimators import normalized_weights
from .gaussians import DivergenceUndefined
from .policies import (
    GaussianHyperpolicy,
    LinearGaussianPolicy,
    batch_log_weights,
    batch_score,
    hyper_log_weight,
    hyper_score,
)

ESTIMATORS = ("is", "sn")
PENALTIES = ("exact", "ess")
MODES = ("A", "P")
LOG_FLOAT_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class SurrogateEval:
    value: float
    is_term: float
    penalty: float
    d2_hat: float
    ess_hat: float

    @property
    def feasible(self) -> bool:
        return self.value > -math.inf


def trajectory_return(traj: Trajectory, gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    return float(np.dot(traj.rewards, gamma ** np.arange(len(traj))))


def _renyi2(delta_mean, log_std_p, log_std_q):
    """Elementwise D_2 between N(m + delta, e^{2 log_std_p}) and N(m, e^{2 log_std_q}).

    Returns the divergence and its partial derivatives w.r.t. ``delta_mean``
    and ``log_std_p``. The caller must ensure ``2 var_q - var_p > 0``.
    """
    var_p = np.exp(2.0 * log_std_p)
    var_2 = 2.0 * np.exp(2.0 * log_std_q) - var_p
    d = delta_mean**2 / var_2 - 0.5 * (np.log(var_2) + 2.0 * log_std_p - 4.0 * log_std_q)
    d_delta = 2.0 * delta_mean / var_2
    d_log_std = 2.0 * var_p * delta_mean**2 / var_2**2 + var_p / var_2 - 1.0
    return d, d_delta, d_log_std


def _feasible(log_std_p, log_std_q) -> bool:
    return bool(np.all(2.0 * np.exp(2.0 * log_std_q) - np.exp(2.0 * log_std_p) > 0))


def _traj_log_renyi(batch: Batch, target: LinearGaussianPolicy, behavioral: LinearGaussianPolicy, grad=False):
    """Per-trajectory ``sum_t D_2(pi'(.|s_t) || pi(.|s_t))`` and optionally its gradient."""
    if not _feasible(target.Omega, behavioral.Omega):
        raise DivergenceUndefined("target std must stay below sqrt(2) times the behavioral std")
    s = batch.states[:, :-1]
    mask = batch.mask[..., None]
    delta = s @ (target.M - behavioral.M).T
    d, d_delta, d_log_std = _renyi2(delta, target.Omega, behavioral.Omega)
    log_d2 = np.sum(d * mask, axis=(1, 2))
    if not grad:
        return log_d2, None
    g_M = np.einsum("nti,ntj->nij", d_delta * mask, s).reshape(batch.n, -1)
    g_Omega = np.sum(d_log_std * mask, axis=1)
    return log_d2, np.concatenate([g_M, g_Omega], axis=1)


def estimate_traj_renyi(batch: Batch, target: LinearGaussianPolicy, behavioral: Optional[LinearGaussianPolicy] = None) -> float:
    """Batch average of the product over visited states of per-state d_2."""
    behavioral = batch.behavioral if behavioral is None else behavioral
    log_d2, _ = _traj_log_renyi(batch, target, behavioral)
    return math.exp(logsumexp(log_d2) - math.log(batch.n))


def sup_renyi_bound(target: LinearGaussianPolicy, behavioral: LinearGaussianPolicy, horizon: int, state_bounds=None) -> float:
    """``(sup_s d_2(pi'(.|s) || pi(.|s)))**horizon`` over a box of states.

    ``state_bounds`` is an array of ``(low, high)`` rows, possibly infinite;
    ``None`` means the whole space. Returns ``inf`` when the supremum diverges.
    """
    if not _feasible(target.Omega, behavioral.Omega):
        return math.inf
    dM = target.M - behavioral.M
    ds = dM.shape[1]
    bounds = np.full((ds, 2), [-np.inf, np.inf]) if state_bounds is None else np.asarray(state_bounds, float)
    finite = np.all(np.isfinite(bounds), axis=1)
    if np.any(dM[:, ~finite] != 0):
        return math.inf
    const, _, _ = _renyi2(0.0, target.Omega, behavioral.Omega)
    var_2 = 2.0 * behavioral.std**2 - target.std**2
    best = 0.0
    # the mean term is a convex quadratic in s, so its max over a box sits on a vertex
    idx = np.flatnonzero(finite)
    for corner in itertools.product(*(bounds[i] for i in idx)):
        s = np.zeros(ds)
        s[idx] = corner
        best = max(best, float(np.sum((dM @ s) ** 2 / var_2)))
    return math.exp(horizon * (best + float(np.sum(const))))


def _check_options(estimator, penalty):
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    if penalty not in PENALTIES:
        raise ValueError(f"penalty must be one of {PENALTIES}, got {penalty!r}")


def _assemble(log_w, returns, score, lam, log_d2_fn, estimator, penalty, grad):
    """Shared IS/SN term, penalty and gradient computation for both modes.

    ``log_d2_fn(grad)`` returns ``(log d2, gradient of log d2 or None)`` or
    raises ``DivergenceUndefined``.
    """
    n = len(log_w)
    w_tilde = normalized_weights(log_w)
    ess = 1.0 / float(np.sum(w_tilde**2))
    if estimator == "is":
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.exp(log_w)
        is_term = float(np.mean(w * returns))
        g_is = (w * returns) @ score / n if grad else None
    else:
        is_term = float(np.dot(w_tilde, returns))
        g_is = (w_tilde * (returns - is_term)) @ score if grad else None

    try:
        log_d2, g_log_d2 = log_d2_fn(grad and penalty == "exact")
        d2 = math.exp(log_d2) if log_d2 < LOG_FLOAT_MAX else math.inf
    except DivergenceUndefined:
        if penalty == "exact":
            return SurrogateEval(-math.inf, is_term, math.inf, math.inf, ess), None
        d2 = math.inf

    if penalty == "exact":
        pen = lam * math.sqrt(d2 / n)
        g_pen = 0.5 * pen * g_log_d2 if grad else None
    else:
        s2 = float(np.sum(w_tilde**2))
        pen = lam * math.sqrt(s2)
        if grad:
            centered = score - w_tilde @ score
            g_pen = pen * (w_tilde**2 @ centered) / s2
        else:
            g_pen = None

    with np.errstate(invalid="ignore"):
        value = is_term - pen
    if not math.isfinite(value):
        value = -math.inf
    out = SurrogateEval(value, is_term, pen, d2, ess)
    return out, (g_is - g_pen if grad else None)


def _apois(batch, target, lam, estimator, penalty, grad):
    behavioral = batch.behavioral
    log_w = batch_log_weights(batch, target, behavioral)
    score = batch_score(batch, target) if grad else None

    def log_d2_fn(with_grad):
        log_d2_i, g_i = _traj_log_renyi(batch, target, behavioral, grad=with_grad)
        log_d2 = float(logsumexp(log_d2_i) - math.log(batch.n))
        if not with_grad:
            return log_d2, None
        return log_d2, softmax(log_d2_i) @ g_i

    return _assemble(log_w, batch.returns, score, lam, log_d2_fn, estimator, penalty, grad)


def _ppois(batch, target, lam, estimator, penalty, grad):
    behavioral = batch.behavioral
    if batch.thetas is None:
        raise ValueError("parameter-based surrogate needs the sampled thetas")
    log_w = hyper_log_weight(batch.thetas, target, behavioral)
    score = hyper_score(batch.thetas, target) if grad else None

    def log_d2_fn(with_grad):
        if not _feasible(target.sigma_log, behavioral.sigma_log):
            raise DivergenceUndefined("target sigma must stay below sqrt(2) times the behavioral sigma")
        d, d_mu, d_log_sigma = _renyi2(target.mu - behavioral.mu, target.sigma_log, behavioral.sigma_log)
        g = np.concatenate([d_mu, d_log_sigma]) if with_grad else None
        return float(np.sum(d)), g

    return _assemble(log_w, batch.returns, score, lam, log_d2_fn, estimator, penalty, grad)


def evaluate(batch: Batch, target, lam: float, mode: str = "A", estimator: str = "is", penalty: str = "exact", grad: bool = False) -> Tuple[SurrogateEval, Optional[np.ndarray]]:
    """Surrogate value and, if ``grad``, its gradient w.r.t. the flat target parameters."""
    _check_options(estimator, penalty)
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    if mode == "A":
        return _apois(batch, target, lam, estimator, penalty, grad)
    if mode == "P":
        return _ppois(batch, target, lam, estimator, penalty, grad)
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def apois_surrogate(batch: Batch, target: LinearGaussianPolicy, lam: float, estimator="is", penalty="exact") -> SurrogateEval:
    return evaluate(batch, target, lam, "A", estimator, penalty)[0]


def ppois_surrogate(batch: Batch, target: GaussianHyperpolicy, lam: float, estimator="is", penalty="exact") -> SurrogateEval:
    return evaluate(batch, target, lam, "P", estimator, penalty)[0]


def practical_surrogate(batch: Batch, target, lam: float, mode: str, estimator="is") -> SurrogateEval:
    """Surrogate with the divergence penalty replaced by ``lam / sqrt(ESS_hat)``."""
    return evaluate(batch, target, lam, mode, estimator, "ess")[0]


def surrogate_gradient(batch: Batch, target, lam: float, mode: str, estimator="is", penalty="exact") -> np.ndarray:
    ev, g = evaluate(batch, target, lam, mode, estimator, penalty, grad=True)
    if not ev.feasible:
        raise DivergenceUndefined("surrogate is undefined at the target parameters")
    return g
