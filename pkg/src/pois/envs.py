"""Small deterministic continuous-control tasks and vectorized trajectory collection.

Every environment steps a whole batch of states at once: ``state`` has shape
``(n, state_dim)`` and ``action`` ``(n, action_dim)``. Actions are clipped to
the declared bounds inside ``step``; trajectories store the unclipped actions
so that policy densities stay Gaussian.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .batch import Batch
from .policies import DeterministicLinearPolicy, GaussianHyperpolicy, LinearGaussianPolicy


@dataclass(frozen=True)
class EnvSpec:
    state_dim: int
    action_dim: int
    horizon: int
    gamma: float
    r_max: float
    action_low: tuple
    action_high: tuple

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not np.isfinite(self.r_max):
            raise ValueError("r_max must be finite")

    @property
    def return_bound(self) -> float:
        if self.gamma == 1.0:
            return self.horizon * self.r_max
        return self.r_max * (1.0 - self.gamma**self.horizon) / (1.0 - self.gamma)


class Env:
    """Base class: subclasses define ``spec``, ``state_bounds``, ``reset`` and ``_dynamics``."""

    spec: EnvSpec
    state_bounds: np.ndarray

    def clip_action(self, action):
        return np.clip(action, self.spec.action_low, self.spec.action_high)

    def step(self, state, action):
        """Advance every row of ``state``; returns ``(next_state, reward, done)``."""
        state = np.asarray(state, dtype=float)
        action = np.asarray(action, dtype=float)
        if not (np.all(np.isfinite(state)) and np.all(np.isfinite(action))):
            raise FloatingPointError("non-finite state or action passed to step")
        single = state.ndim == 1
        state2, action2 = np.atleast_2d(state), np.atleast_2d(action)
        nxt, reward, done = self._dynamics(state2, self.clip_action(action2))
        if np.any(np.abs(reward) > self.spec.r_max + 1e-9):
            raise RuntimeError(f"{type(self).__name__} produced a reward above r_max={self.spec.r_max}")
        if single:
            return nxt[0], float(reward[0]), bool(done[0])
        return nxt, reward, done

    def _dynamics(self, state, action):
        raise NotImplementedError

    def reset(self, rng, n=None):
        raise NotImplementedError


class LQG(Env):
    """Scalar linear-quadratic task: ``x' = clip(x + a)``, reward ``-(q x^2 + r a^2) / 2``."""

    def __init__(self, horizon=20, gamma=0.99, q_weight=1.0, r_weight=1.0, max_state=4.0, max_action=2.0):
        self.q_weight = q_weight
        self.r_weight = r_weight
        self.max_state = max_state
        self.init_low, self.init_high = -1.0, 1.0
        r_max = 0.5 * (q_weight * max_state**2 + r_weight * max_action**2)
        self.spec = EnvSpec(1, 1, horizon, gamma, r_max, (-max_action,), (max_action,))
        self.state_bounds = np.array([[-max_state, max_state]])

    def reset(self, rng, n=None):
        x = rng.uniform(self.init_low, self.init_high, size=(1 if n is None else n, 1))
        return x[0] if n is None else x

    def _dynamics(self, state, action):
        reward = -0.5 * (self.q_weight * state[:, 0] ** 2 + self.r_weight * action[:, 0] ** 2)
        nxt = np.clip(state + action, -self.max_state, self.max_state)
        return nxt, reward, np.zeros(len(state), dtype=bool)


class CartPole(Env):
    """Cart-pole balancing with a continuous force, Euler-integrated at 50 Hz."""

    gravity = 9.8
    cart_mass = 1.0
    pole_mass = 0.1
    half_length = 0.5
    force_scale = 10.0
    dt = 0.02
    x_limit = 2.4
    theta_limit = 0.2

    def __init__(self, horizon=500, gamma=1.0):
        self.spec = EnvSpec(4, 1, horizon, gamma, 10.0, (-1.0,), (1.0,))
        self.state_bounds = np.array(
            [[-self.x_limit, self.x_limit], [-np.inf, np.inf], [-self.theta_limit, self.theta_limit], [-np.inf, np.inf]]
        )

    def reset(self, rng, n=None):
        s = rng.uniform(-0.05, 0.05, size=(1 if n is None else n, 4))
        return s[0] if n is None else s

    def _dynamics(self, state, action):
        x, x_dot, theta, theta_dot = state.T
        force = self.force_scale * action[:, 0]
        total = self.cart_mass + self.pole_mass
        pml = self.pole_mass * self.half_length
        cos, sin = np.cos(theta), np.sin(theta)
        temp = (force + pml * theta_dot**2 * sin) / total
        theta_acc = (self.gravity * sin - cos * temp) / (
            self.half_length * (4.0 / 3.0 - self.pole_mass * cos**2 / total)
        )
        x_acc = temp - pml * theta_acc * cos / total
        nxt = np.stack(
            [
                x + self.dt * x_dot,
                x_dot + self.dt * x_acc,
                theta + self.dt * theta_dot,
                theta_dot + self.dt * theta_acc,
            ],
            axis=1,
        )
        reward = 10.0 - (1.0 - np.cos(nxt[:, 2])) - 1e-5 * action[:, 0] ** 2
        done = (np.abs(nxt[:, 0]) > self.x_limit) | (np.abs(nxt[:, 2]) > self.theta_limit)
        return nxt, reward, done


class MountainCar(Env):
    """Continuous mountain car; -1 per step until the car reaches the flag."""

    min_position, max_position = -1.2, 0.6
    max_speed = 0.07
    goal_position = 0.45
    power = 0.0015

    def __init__(self, horizon=500, gamma=1.0):
        self.spec = EnvSpec(2, 1, horizon, gamma, 1.0, (-1.0,), (1.0,))
        self.state_bounds = np.array(
            [[self.min_position, self.max_position], [-self.max_speed, self.max_speed]]
        )

    def reset(self, rng, n=None):
        m = 1 if n is None else n
        s = np.stack([rng.uniform(-0.6, -0.4, size=m), np.zeros(m)], axis=1)
        return s[0] if n is None else s

    def _dynamics(self, state, action):
        pos, vel = state.T
        vel = np.clip(vel + action[:, 0] * self.power - 0.0025 * np.cos(3.0 * pos), -self.max_speed, self.max_speed)
        pos = np.clip(pos + vel, self.min_position, self.max_position)
        vel = np.where((pos == self.min_position) & (vel < 0), 0.0, vel)
        done = pos >= self.goal_position
        return np.stack([pos, vel], axis=1), -np.ones(len(pos)), done


class Pendulum(Env):
    """Inverted pendulum balancing around the upright position.

    State is (angle from upright, angular velocity); reward ``1 - angle**2``;
    the episode ends once ``|angle| > 1`` rad.
    """

    gravity = 9.8
    mass = 1.0
    length = 1.0
    max_torque = 2.0
    max_speed = 8.0
    dt = 0.05
    angle_limit = 1.0

    def __init__(self, horizon=500, gamma=1.0):
        self.spec = EnvSpec(2, 1, horizon, gamma, 1.0, (-1.0,), (1.0,))
        self.state_bounds = np.array([[-self.angle_limit, self.angle_limit], [-self.max_speed, self.max_speed]])

    def reset(self, rng, n=None):
        s = rng.uniform(-0.1, 0.1, size=(1 if n is None else n, 2))
        return s[0] if n is None else s

    def _dynamics(self, state, action):
        angle, speed = state.T
        torque = self.max_torque * action[:, 0]
        acc = self.gravity / self.length * np.sin(angle) + torque / (self.mass * self.length**2)
        speed = np.clip(speed + self.dt * acc, -self.max_speed, self.max_speed)
        angle = angle + self.dt * speed
        done = np.abs(angle) > self.angle_limit
        reward = 1.0 - np.minimum(angle**2, 1.0)
        return np.stack([angle, speed], axis=1), reward, done


ENVIRONMENTS = {"lqg": LQG, "cartpole": CartPole, "mountaincar": MountainCar, "pendulum": Pendulum}


def make_env(name: str, horizon: Optional[int] = None, gamma: Optional[float] = None) -> Env:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    kwargs = {}
    if horizon is not None:
        kwargs["horizon"] = horizon
    if gamma is not None:
        kwargs["gamma"] = gamma
    return cls(**kwargs)


def reset(env: Env, rng, n=None):
    return env.reset(rng, n)


def step(env: Env, state, action):
    return env.step(state, action)


def collect_trajectories(env: Env, action_policy, n: int, horizon: Optional[int] = None, rng=None) -> Batch:
    """Run ``n`` episodes in lockstep, each truncated at ``horizon`` or on termination.

    ``action_policy`` may be a ``LinearGaussianPolicy``, a
    ``DeterministicLinearPolicy`` or a ``GaussianHyperpolicy``; in the last case
    one deterministic linear policy is drawn per episode and stored in
    ``Batch.thetas``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    horizon = env.spec.horizon if horizon is None else horizon
    ds, da = env.spec.state_dim, env.spec.action_dim

    thetas = None
    if isinstance(action_policy, GaussianHyperpolicy):
        if action_policy.dim != da * ds:
            raise ValueError(f"hyperpolicy dimension {action_policy.dim} != {da * ds}")
        thetas = action_policy.sample(rng, n)
        gains = thetas.reshape(n, da, ds)

        def act(s):
            return np.einsum("nij,nj->ni", gains, s)

    elif isinstance(action_policy, LinearGaussianPolicy):

        def act(s):
            return action_policy.act(s, rng)

    elif isinstance(action_policy, DeterministicLinearPolicy):

        def act(s):
            return action_policy.act(s)

    else:
        raise TypeError(f"unsupported policy type {type(action_policy).__name__}")

    states = np.zeros((n, horizon + 1, ds))
    actions = np.zeros((n, horizon, da))
    rewards = np.zeros((n, horizon))
    lengths = np.zeros(n, dtype=int)
    active = np.ones(n, dtype=bool)
    dones = np.zeros(n, dtype=bool)

    s = env.reset(rng, n)
    states[:, 0] = s
    for t in range(horizon):
        a = act(s)
        nxt, r, done = env.step(s, a)
        actions[active, t] = a[active]
        rewards[active, t] = r[active]
        lengths += active
        s = np.where(active[:, None], nxt, s)
        states[:, t + 1] = s
        newly_done = active & done
        dones |= newly_done
        active &= ~done
        if not active.any():
            states[:, t + 2 :] = s[:, None, :]
            break

    batch = Batch(states, actions, rewards, lengths, env.spec.gamma, thetas, action_policy, dones)
    bound = env.spec.r_max * np.sum(env.spec.gamma ** np.arange(horizon))
    if np.any(np.abs(batch.returns) > bound + 1e-6):
        raise RuntimeError("trajectory return exceeds r_max * (1 - gamma^H) / (1 - gamma)")
    return batch


def evaluate_policy(env: Env, policy, n: int, rng, horizon: Optional[int] = None) -> float:
    """Monte Carlo estimate of the expected discounted return."""
    return float(np.mean(collect_trajectories(env, policy, n, horizon, rng).returns))


def lqg_riccati(env: LQG, horizon: Optional[int] = None, gamma: Optional[float] = None):
    """Backward Riccati recursion; returns ``(P, K)`` with cost-to-go ``P[t] x^2 / 2`` and ``a = -K[t] x``."""
    horizon = env.spec.horizon if horizon is None else horizon
    gamma = env.spec.gamma if gamma is None else gamma
    q, r = env.q_weight, env.r_weight
    P = np.zeros(horizon + 1)
    K = np.zeros(horizon)
    for t in range(horizon - 1, -1, -1):
        gp = gamma * P[t + 1]
        K[t] = gp / (r + gp) if r + gp > 0 else 0.0
        P[t] = q + gp - gp * K[t]
    return P, K


def lqg_optimal_return(env: LQG, horizon: Optional[int] = None, gamma: Optional[float] = None) -> float:
    """Optimal expected discounted return from ``x0 ~ U[init_low, init_high]`` (clipping inactive)."""
    P, _ = lqg_riccati(env, horizon, gamma)
    lo, hi = env.init_low, env.init_high
    second_moment = (hi**3 - lo**3) / (3.0 * (hi - lo))
    return -0.5 * P[0] * second_moment


def lqg_linear_return(env: LQG, gain: float, sigma: float = 0.0, horizon: Optional[int] = None, gamma: Optional[float] = None) -> float:
    """Expected return of ``a = gain * x + sigma * eps`` on the LQG, ignoring clipping."""
    horizon = env.spec.horizon if horizon is None else horizon
    gamma = env.spec.gamma if gamma is None else gamma
    lo, hi = env.init_low, env.init_high
    v = (hi**3 - lo**3) / (3.0 * (hi - lo))
    total = 0.0
    for t in range(horizon):
        total += gamma**t * 0.5 * (env.q_weight * v + env.r_weight * (gain**2 * v + sigma**2))
        v = (1.0 + gain) ** 2 * v + sigma**2
    return -total
