import numpy as np
import pytest
from hypothesis import strategies as st

from hadapg.mdp import validate_mdp


def bandit_mdp(rewards=(1.0, 0.0), gamma=0.5):
    """One state that always returns to itself."""
    K = len(rewards)
    return validate_mdp(np.ones((1, K, 1)), np.array([rewards]), gamma, [1.0])


def flip_chain(gamma=0.5, mu=(0.5, 0.5), num_actions=2):
    P = np.zeros((2, num_actions, 2))
    P[0, :, 1] = 1.0
    P[1, :, 0] = 1.0
    r = np.zeros((2, num_actions))
    r[0] = 1.0
    return validate_mdp(P, r, gamma, mu)


def random_mdp(rng, S, A, gamma, sparse=False, tri_reward=False):
    P = rng.random((S, A, S))
    if sparse:
        P *= rng.random((S, A, S)) < 0.5
        P[np.arange(S)[:, None], np.arange(A)[None, :], rng.integers(S, size=(S, A))] += 1.0
    P /= P.sum(axis=2, keepdims=True)
    R = rng.random((S, A, S)) if tri_reward else rng.random((S, A))
    mu = rng.random(S) + 0.05
    return validate_mdp(P, R, gamma, mu / mu.sum())


def random_policy(rng, S, A):
    pi = rng.random((S, A)) + 1e-3
    return pi / pi.sum(axis=1, keepdims=True)


@st.composite
def mdps(draw, max_states=6, max_actions=5, max_gamma=0.95):
    S = draw(st.integers(1, max_states))
    A = draw(st.integers(1, max_actions))
    gamma = draw(st.floats(0.0, max_gamma))
    seed = draw(st.integers(0, 2**32 - 1))
    sparse = draw(st.booleans())
    tri = draw(st.booleans())
    return random_mdp(np.random.default_rng(seed), S, A, gamma, sparse, tri), seed


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
