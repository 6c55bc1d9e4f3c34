"""Trajectory and batch containers shared by the environments and the surrogates."""
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Trajectory:
    """One episode. ``actions`` are the sampled (pre-clipping) actions."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    done: bool = False

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        actions = np.asarray(self.actions, dtype=float)
        if actions.ndim == 1:
            actions = actions[:, None]
        rewards = np.asarray(self.rewards, dtype=float).ravel()
        if not len(actions) == len(rewards) == len(states) - 1:
            raise ValueError(
                f"need len(actions) == len(rewards) == len(states) - 1, got "
                f"{len(actions)}, {len(rewards)}, {len(states)}"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "rewards", rewards)

    def __len__(self):
        return len(self.rewards)


@dataclass
class Batch:
    """N episodes stored as zero-padded arrays.

    ``states`` has shape ``(N, H + 1, state_dim)``, ``actions`` ``(N, H, action_dim)``,
    ``rewards`` ``(N, H)``; only the first ``lengths[i]`` steps of row ``i`` are real.
    ``thetas`` holds the sampled policy parameters in parameter-based mode and
    ``behavioral`` the policy or hyperpolicy that generated the data.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    lengths: np.ndarray
    gamma: float = 1.0
    thetas: Optional[np.ndarray] = None
    behavioral: Any = None
    dones: Optional[np.ndarray] = None
    _returns: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, dtype=int)
        if self.dones is None:
            self.dones = np.zeros(len(self.lengths), dtype=bool)
        if self.thetas is not None:
            self.thetas = np.asarray(self.thetas, dtype=float)
            if len(self.thetas) != self.n:
                raise ValueError("one theta per trajectory is required")

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def horizon(self) -> int:
        return self.rewards.shape[1]

    @property
    def mask(self) -> np.ndarray:
        return np.arange(self.horizon)[None, :] < self.lengths[:, None]

    @property
    def returns(self) -> np.ndarray:
        """Discounted return of every trajectory."""
        if self._returns is None:
            discounts = self.gamma ** np.arange(self.horizon)
            self._returns = (self.rewards * self.mask) @ discounts
        return self._returns

    @property
    def trajectories(self) -> List[Trajectory]:
        return [self.trajectory(i) for i in range(self.n)]

    def trajectory(self, i: int) -> Trajectory:
        t = self.lengths[i]
        return Trajectory(
            self.states[i, : t + 1], self.actions[i, :t], self.rewards[i, :t], bool(self.dones[i])
        )

    @classmethod
    def from_trajectories(
        cls,
        trajectories: Sequence[Trajectory],
        gamma: float = 1.0,
        horizon: Optional[int] = None,
        thetas=None,
        behavioral=None,
    ) -> "Batch":
        if not trajectories:
            raise ValueError("a batch needs at least one trajectory")
        lengths = np.array([len(t) for t in trajectories])
        horizon = int(lengths.max()) if horizon is None else horizon
        if lengths.max() > horizon:
            raise ValueError(f"trajectory longer than horizon {horizon}")
        n = len(trajectories)
        ds = trajectories[0].states.shape[1]
        da = trajectories[0].actions.shape[1] if lengths.max() > 0 else 1
        states = np.zeros((n, horizon + 1, ds))
        actions = np.zeros((n, horizon, da))
        rewards = np.zeros((n, horizon))
        for i, tr in enumerate(trajectories):
            t = len(tr)
            states[i, : t + 1] = tr.states
            states[i, t + 1 :] = tr.states[-1]
            actions[i, :t] = tr.actions
            rewards[i, :t] = tr.rewards
        dones = np.array([t.done for t in trajectories])
        return cls(states, actions, rewards, lengths, gamma, thetas, behavioral, dones)
