import numpy as np
import pytest

from pois.batch import Batch
from pois.policies import GaussianHyperpolicy, LinearGaussianPolicy


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_action_batch(rng, n=6, horizon=4, ds=2, da=1, gamma=0.95, ragged=True):
    """Synthetic batch drawn from a random linear-Gaussian behavioral policy.

    States are arbitrary (the surrogates treat them as constants); lengths are
    ragged so that padding is exercised.
    """
    behavioral = LinearGaussianPolicy(rng.normal(0.0, 0.5, (da, ds)), rng.normal(-0.2, 0.2, da))
    states = rng.normal(size=(n, horizon + 1, ds))
    actions = behavioral.act(states[:, :-1], rng)
    rewards = rng.normal(size=(n, horizon))
    lengths = rng.integers(1, horizon + 1, size=n) if ragged else np.full(n, horizon)
    lengths[0] = horizon
    return Batch(states, actions, rewards, lengths, gamma, behavioral=behavioral)


def random_param_batch(rng, n=6, dim=3, gamma=1.0):
    behavioral = GaussianHyperpolicy(rng.normal(size=dim), rng.normal(-0.3, 0.3, dim))
    thetas = behavioral.sample(rng, n)
    rewards = rng.normal(size=(n, 1)) + thetas.sum(axis=1, keepdims=True)
    states = np.zeros((n, 2, 1))
    actions = np.zeros((n, 1, 1))
    return Batch(states, actions, rewards, np.ones(n, dtype=int), gamma, thetas, behavioral)


def perturb_policy(rng, policy, scale=0.1):
    flat = policy.flat + scale * rng.normal(size=policy.flat.shape)
    if isinstance(policy, GaussianHyperpolicy):
        return GaussianHyperpolicy.from_flat(flat)
    return LinearGaussianPolicy.from_flat(flat, policy.action_dim, policy.state_dim)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
