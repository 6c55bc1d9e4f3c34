"""Online/offline POIS learning loops and the parabolic line search."""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .batch import Batch
from .envs import Env, collect_trajectories
from .estimators import BoundConfig, lambda_from_delta, weight_variance
from .policies import (
    GaussianHyperpolicy,
    LinearGaussianPolicy,
    batch_log_weights,
    estimated_fim,
    exact_hyper_fim_diag,
    hyper_log_weight,
)
from .surrogate import ESTIMATORS, PENALTIES, SurrogateEval, evaluate

logger = logging.getLogger(__name__)

FIM_RIDGE = 1e-6


@dataclass(frozen=True)
class LineSearchConfig:
    tol_dl: float = 1e-4
    max_attempts: int = 30
    eta: float = 2.0

    def __post_init__(self):
        if self.tol_dl <= 0:
            raise ValueError("tol_dl must be positive")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.eta <= 1:
            raise ValueError("eta must be greater than 1")


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyperparameters of one POIS run.

    ``estimator`` and ``natural`` default per algorithm when left as ``None``:
    IS without natural gradient for A-POIS, SN with natural gradient for P-POIS.
    ``f_inf`` fixes the return bound; ``None`` uses the largest absolute return
    of each collected batch.
    """

    delta: float = 0.4
    n_episodes: int = 100
    horizon: Optional[int] = 500
    gamma: Optional[float] = None
    online_iterations: int = 500
    max_offline_iterations: int = 10
    estimator: Optional[str] = None
    natural: Optional[bool] = None
    penalty: str = "exact"
    seed: int = 0
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    f_inf: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        for name in ("n_episodes", "online_iterations", "max_offline_iterations"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.estimator is not None and self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}")

    def resolved(self, mode: str) -> "OptimizerConfig":
        estimator = self.estimator or ("is" if mode == "A" else "sn")
        natural = self.natural if self.natural is not None else mode == "P"
        return replace(self, estimator=estimator, natural=natural)


@dataclass
class OfflineTrace:
    evals: List[SurrogateEval] = field(default_factory=list)
    step_sizes: List[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.step_sizes)


@dataclass
class IterationRecord:
    iteration: int
    episodes: int
    avg_return: float
    ess_hat: float
    weight_var: float
    d2_hat: float
    bound_before: float
    bound_after: float
    policy_sigma_mean: float
    offline_iters: int
    step_size_last: float
    trace: Optional[OfflineTrace] = field(default=None, repr=False)


def next_epsilon(eps: float, delta_l: float, eta: float) -> float:
    """Normalized step update: grow by ``eta`` when the objective looks superlinear,
    otherwise jump to the vertex of the interpolating parabola."""
    if delta_l > eps * (2.0 * eta - 1.0) / (2.0 * eta):
        return eta * eps
    if delta_l == -math.inf:
        return eps / (2.0 * eta)
    return eps**2 / (2.0 * (eps - delta_l))


def parabolic_line_search(
    objective: Callable[[float], float],
    grad_metric_norm_sq: float,
    cfg: LineSearchConfig = LineSearchConfig(),
    base_value: Optional[float] = None,
) -> Tuple[float, float]:
    """Step size along a fixed ascent direction by successive parabola fits.

    ``objective(alpha)`` evaluates the surrogate at ``theta_0 + alpha * direction``
    and ``grad_metric_norm_sq`` is ``g^T G^{-1} g`` for that direction. Returns
    ``(alpha, improvement)``; ``(0.0, 0.0)`` when no probe improved.
    """
    if not grad_metric_norm_sq > 0:
        raise ValueError("grad_metric_norm_sq must be positive")
    base = objective(0.0) if base_value is None else base_value
    alpha_prev, dl_prev = 0.0, -math.inf
    eps = 1.0
    for _ in range(cfg.max_attempts):
        alpha = eps / grad_metric_norm_sq
        value = objective(alpha)
        dl = value - base if math.isfinite(value) else -math.inf
        if dl < dl_prev + cfg.tol_dl:
            break
        alpha_prev, dl_prev = alpha, dl
        eps = next_epsilon(eps, dl, cfg.eta)
    if not dl_prev >= 0:
        return 0.0, 0.0
    return alpha_prev, dl_prev


def _params_to_target(mode, flat, template):
    if mode == "A":
        return LinearGaussianPolicy.from_flat(flat, template.action_dim, template.state_dim)
    return GaussianHyperpolicy.from_flat(flat)


def batch_lambda(batch: Batch, cfg: OptimizerConfig) -> float:
    f_inf = cfg.f_inf if cfg.f_inf is not None else float(np.max(np.abs(batch.returns)))
    return lambda_from_delta(BoundConfig(cfg.delta, f_inf, batch.n))


def _metric_direction(mode, batch, target, grad, cfg):
    if not cfg.natural:
        return grad
    if mode == "P":
        return grad / exact_hyper_fim_diag(target)
    fim = estimated_fim(batch, target, batch.behavioral, use_sn=cfg.estimator == "sn")
    fim += FIM_RIDGE * np.eye(len(grad))
    try:
        direction = np.linalg.solve(fim, grad)
    except np.linalg.LinAlgError:
        direction = None
    if direction is None or not np.all(np.isfinite(direction)):
        logger.warning("singular Fisher estimate; using the identity metric for this step")
        return grad
    return direction


def offline_optimize(batch: Batch, start_params, cfg: OptimizerConfig, mode: Optional[str] = None, lam: Optional[float] = None):
    """Maximize the surrogate on a fixed batch, starting from the behavioral parameters.

    Returns the last accepted parameters and an ``OfflineTrace`` whose first
    entry is the surrogate at ``start_params``.
    """
    if mode is None:
        mode = "P" if isinstance(start_params, GaussianHyperpolicy) else "A"
    cfg = cfg.resolved(mode)
    lam = batch_lambda(batch, cfg) if lam is None else lam
    opts = dict(mode=mode, estimator=cfg.estimator, penalty=cfg.penalty)

    def surrogate_at(flat):
        # far probes can leave the region where the parameters or the weights are representable
        try:
            with np.errstate(all="ignore"):
                return evaluate(batch, _params_to_target(mode, flat, start_params), lam, **opts)[0].value
        except (ValueError, OverflowError, FloatingPointError):
            return -math.inf

    flat = start_params.flat.copy()
    target = start_params
    trace = OfflineTrace()
    current, grad = evaluate(batch, target, lam, grad=True, **opts)
    trace.evals.append(current)
    for _ in range(cfg.max_offline_iterations):
        if grad is None or not np.all(np.isfinite(grad)):
            break
        direction = _metric_direction(mode, batch, target, grad, cfg)
        norm_sq = float(grad @ direction)
        if not norm_sq > 0 or not math.isfinite(norm_sq):
            break
        alpha, _ = parabolic_line_search(
            lambda a: surrogate_at(flat + a * direction), norm_sq, cfg.line_search, base_value=current.value
        )
        if alpha == 0.0:
            break
        flat = flat + alpha * direction
        target = _params_to_target(mode, flat, start_params)
        current, grad = evaluate(batch, target, lam, grad=True, **opts)
        trace.evals.append(current)
        trace.step_sizes.append(alpha)
    return target, trace


def _sigma_mean(params) -> float:
    if isinstance(params, GaussianHyperpolicy):
        return float(np.mean(params.sigma))
    return float(np.mean(params.std))


def _run(env: Env, cfg: OptimizerConfig, mode: str, callback=None) -> List[IterationRecord]:
    cfg = cfg.resolved(mode)
    rng = np.random.default_rng(cfg.seed)
    ds, da = env.spec.state_dim, env.spec.action_dim
    if mode == "A":
        params = LinearGaussianPolicy.initial(da, ds, rng)
    else:
        params = GaussianHyperpolicy.initial(da * ds, rng)

    records = []
    episodes = 0
    for j in range(cfg.online_iterations):
        try:
            batch = collect_trajectories(env, params, cfg.n_episodes, cfg.horizon, rng)
        except Exception as exc:
            raise RuntimeError(f"trajectory collection failed at online iteration {j}") from exc
        if cfg.gamma is not None:
            batch.gamma = cfg.gamma
            batch._returns = None
        episodes += batch.n
        lam = batch_lambda(batch, cfg)
        new_params, trace = offline_optimize(batch, params, cfg, mode, lam)

        if mode == "A":
            log_w = batch_log_weights(batch, new_params, params)
        else:
            log_w = hyper_log_weight(batch.thetas, new_params, params)
        final = trace.evals[-1]
        rec = IterationRecord(
            iteration=j,
            episodes=episodes,
            avg_return=float(np.mean(batch.returns)),
            ess_hat=final.ess_hat,
            weight_var=weight_variance(log_w),
            d2_hat=final.d2_hat,
            bound_before=trace.evals[0].value,
            bound_after=final.value,
            policy_sigma_mean=_sigma_mean(new_params),
            offline_iters=trace.iterations,
            step_size_last=trace.step_sizes[-1] if trace.step_sizes else 0.0,
            trace=trace,
        )
        records.append(rec)
        if callback is not None:
            callback(rec, new_params)
        params = new_params
    return records


def run_apois(env: Env, cfg: OptimizerConfig, callback=None) -> List[IterationRecord]:
    """Action-based POIS with a linear-Gaussian policy.

    ``callback(record, params)`` is invoked after every online iteration.
    """
    return _run(env, cfg, "A", callback)


def run_ppois(env: Env, cfg: OptimizerConfig, callback=None) -> List[IterationRecord]:
    """Parameter-based POIS with a Gaussian hyperpolicy over linear deterministic policies."""
    return _run(env, cfg, "P", callback)
