"""Linear policies, Gaussian hyperpolicies, likelihood ratios, scores and Fisher matrices.

Flat parameter layouts used throughout the package:

* ``LinearGaussianPolicy``: ``[M.ravel(), Omega]`` (row-major ``M``, then log stds)
* ``GaussianHyperpolicy``: ``[mu, log_sigma]``
"""
from dataclasses import dataclass

import numpy as np

from .batch import Batch, Trajectory
from .estimators import normalized_weights
from .gaussians import LOG_2PI, DiagGaussian

INIT_MEAN_STD = 0.01
# keeps exp(2 * log_std) and its reciprocal representable
MAX_ABS_LOG_STD = 300.0


@dataclass(frozen=True)
class LinearGaussianPolicy:
    """``a ~ N(M s, diag(exp(2 Omega)))`` with no bias term."""

    M: np.ndarray
    Omega: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        Omega = np.atleast_1d(np.asarray(self.Omega, dtype=float))
        if Omega.shape != (M.shape[0],):
            raise ValueError(f"Omega must have shape ({M.shape[0]},), got {Omega.shape}")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(Omega))):
            raise ValueError("policy parameters must be finite")
        if np.any(np.abs(Omega) > MAX_ABS_LOG_STD):
            raise ValueError(f"log standard deviations must lie within +-{MAX_ABS_LOG_STD}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "Omega", Omega)

    @classmethod
    def initial(cls, action_dim, state_dim, rng):
        M = INIT_MEAN_STD * rng.standard_normal((action_dim, state_dim))
        return cls(M, np.zeros(action_dim))

    @classmethod
    def from_flat(cls, params, action_dim, state_dim):
        params = np.asarray(params, dtype=float)
        k = action_dim * state_dim
        return cls(params[:k].reshape(action_dim, state_dim), params[k:])

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.M.ravel(), self.Omega])

    @property
    def action_dim(self):
        return self.M.shape[0]

    @property
    def state_dim(self):
        return self.M.shape[1]

    @property
    def std(self):
        return np.exp(self.Omega)

    def mean(self, states):
        return np.asarray(states, dtype=float) @ self.M.T

    def distribution(self, state) -> DiagGaussian:
        return DiagGaussian(self.mean(state), self.Omega)

    def act(self, state, rng):
        state = np.asarray(state, dtype=float)
        if state.shape[-1] != self.state_dim:
            raise ValueError(f"expected state dimension {self.state_dim}, got {state.shape}")
        mean = self.mean(state)
        return mean + self.std * rng.standard_normal(mean.shape)

    def log_prob(self, states, actions):
        """Per-step log density; broadcasts over leading axes."""
        z = (np.asarray(actions, dtype=float) - self.mean(states)) / self.std
        return -0.5 * np.sum(z**2, axis=-1) - np.sum(self.Omega) - 0.5 * self.action_dim * LOG_2PI


@dataclass(frozen=True)
class DeterministicLinearPolicy:
    """``a = M s`` exactly, with ``M`` stored flattened row-major in ``theta``."""

    theta: np.ndarray
    action_dim: int
    state_dim: int

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        if theta.size != self.action_dim * self.state_dim:
            raise ValueError(f"theta must have {self.action_dim * self.state_dim} entries")
        object.__setattr__(self, "theta", theta)

    @property
    def M(self):
        return self.theta.reshape(self.action_dim, self.state_dim)

    def act(self, state, rng=None):
        return np.asarray(state, dtype=float) @ self.M.T


@dataclass(frozen=True)
class GaussianHyperpolicy:
    """``theta ~ N(mu, diag(exp(2 sigma_log)))`` over deterministic-policy parameters."""

    mu: np.ndarray
    sigma_log: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma_log = np.atleast_1d(np.asarray(self.sigma_log, dtype=float))
        if mu.shape != sigma_log.shape or mu.ndim != 1:
            raise ValueError("mu and sigma_log must be vectors of equal size")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma_log))):
            raise ValueError("hyperpolicy parameters must be finite")
        if np.any(np.abs(sigma_log) > MAX_ABS_LOG_STD):
            raise ValueError(f"log standard deviations must lie within +-{MAX_ABS_LOG_STD}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_log", sigma_log)

    @classmethod
    def initial(cls, dim, rng):
        return cls(INIT_MEAN_STD * rng.standard_normal(dim), np.zeros(dim))

    @classmethod
    def from_flat(cls, params):
        params = np.asarray(params, dtype=float)
        k = params.size // 2
        return cls(params[:k], params[k:])

    @property
    def flat(self):
        return np.concatenate([self.mu, self.sigma_log])

    @property
    def dim(self):
        return self.mu.size

    @property
    def sigma(self):
        return np.exp(self.sigma_log)

    def as_gaussian(self) -> DiagGaussian:
        return DiagGaussian(self.mu, self.sigma_log)

    def sample(self, rng, n=None):
        return self.as_gaussian().sample(rng, n)

    def log_pdf(self, thetas):
        return self.as_gaussian().log_pdf(thetas)


def batch_log_likelihood(batch: Batch, policy: LinearGaussianPolicy) -> np.ndarray:
    """Sum over the real steps of each trajectory of ``log pi(a_t | s_t)``."""
    lp = policy.log_prob(batch.states[:, :-1], batch.actions)
    return np.sum(lp * batch.mask, axis=1)


def batch_log_weights(batch: Batch, target: LinearGaussianPolicy, behavioral: LinearGaussianPolicy):
    return batch_log_likelihood(batch, target) - batch_log_likelihood(batch, behavioral)


def batch_score(batch: Batch, policy: LinearGaussianPolicy) -> np.ndarray:
    """Gradient of each trajectory log-likelihood w.r.t. the flat policy parameters."""
    s = batch.states[:, :-1]
    m = batch.mask[..., None]
    z = (batch.actions - policy.mean(s)) / policy.std
    g_mean = z / policy.std * m
    g_M = np.einsum("nti,ntj->nij", g_mean, s).reshape(batch.n, -1)
    g_Omega = np.sum((z**2 - 1.0) * m, axis=1)
    return np.concatenate([g_M, g_Omega], axis=1)


def traj_log_weight(traj: Trajectory, target: LinearGaussianPolicy, behavioral: LinearGaussianPolicy) -> float:
    s, a = traj.states[:-1], traj.actions
    return float(np.sum(target.log_prob(s, a) - behavioral.log_prob(s, a)))


def traj_score(traj: Trajectory, policy: LinearGaussianPolicy) -> np.ndarray:
    return batch_score(Batch.from_trajectories([traj]), policy)[0]


def hyper_log_weight(theta, target: GaussianHyperpolicy, behavioral: GaussianHyperpolicy):
    """``log nu_target(theta) - log nu_behavioral(theta)``; vectorized over rows of ``theta``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != target.dim or target.dim != behavioral.dim:
        raise ValueError("dimension mismatch between theta and hyperpolicies")
    return target.log_pdf(theta) - behavioral.log_pdf(theta)


def hyper_score(theta, hyper: GaussianHyperpolicy) -> np.ndarray:
    """Gradient of ``log nu(theta)`` w.r.t. ``(mu, log sigma)``."""
    z = (np.asarray(theta, dtype=float) - hyper.mu) / hyper.sigma
    return np.concatenate([z / hyper.sigma, z**2 - 1.0], axis=-1)


def exact_hyper_fim_diag(hyper: GaussianHyperpolicy) -> np.ndarray:
    return np.concatenate([np.exp(-2.0 * hyper.sigma_log), np.full(hyper.dim, 2.0)])


def exact_hyper_fim(hyper: GaussianHyperpolicy) -> np.ndarray:
    """Fisher matrix of the hyperpolicy in ``(mu, log sigma)`` coordinates (diagonal)."""
    return np.diag(exact_hyper_fim_diag(hyper))


def estimated_fim(batch: Batch, target: LinearGaussianPolicy, behavioral: LinearGaussianPolicy, use_sn=False):
    """Importance-weighted average of trajectory score outer products."""
    log_w = batch_log_weights(batch, target, behavioral)
    if use_sn:
        coef = normalized_weights(log_w)
    else:
        coef = np.exp(log_w) / batch.n
    g = batch_score(batch, target)
    fim = (g * coef[:, None]).T @ g
    return 0.5 * (fim + fim.T)
