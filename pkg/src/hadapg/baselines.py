"""Softmax PG / NPG baselines and the single-state (bandit) update rules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import TabularMdp, policy_evaluation, validate_mdp


def _shifted(logits):
    logits = np.array(logits, dtype=float)
    logits -= logits.max(axis=-1, keepdims=True)
    logits.setflags(write=False)
    return logits


@dataclass(frozen=True)
class SoftmaxParams:
    """Tabular logits, stored with the row maximum shifted to zero."""

    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", _shifted(self.theta))

    @property
    def policy(self) -> np.ndarray:
        e = np.exp(self.theta)
        return e / e.sum(axis=-1, keepdims=True)

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "SoftmaxParams":
        return cls(np.zeros((num_states, num_actions)))


@dataclass(frozen=True)
class MabInstance:
    rewards: np.ndarray

    def __post_init__(self):
        r = np.array(self.rewards, dtype=float)
        if r.ndim != 1 or r.size < 1:
            raise ValueError("a bandit needs at least one arm")
        if (r < 0).any() or (r > 1).any():
            raise ValueError("arm rewards must lie in [0, 1]")
        r.setflags(write=False)
        object.__setattr__(self, "rewards", r)

    @property
    def num_arms(self) -> int:
        return self.rewards.size

    def advantage(self, pi) -> np.ndarray:
        return self.rewards - np.dot(pi, self.rewards)

    def value_error(self, pi) -> float:
        """One-shot regret max_a r(a) - E_pi[r], summed gap by gap to avoid cancellation."""
        return float(np.dot(pi, self.rewards.max() - self.rewards))

    def as_mdp(self) -> TabularMdp:
        """Single-state, gamma = 0 embedding."""
        K = self.num_arms
        return validate_mdp(np.ones((1, K, 1)), self.rewards[None, :], 0.0, [1.0])


def softmax_pg_step(mdp: TabularMdp, params: SoftmaxParams, eta: float) -> SoftmaxParams:
    """theta += eta / (1 - gamma) * d(s) * pi(a|s) * A(s, a)."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    pi = params.policy
    vb = policy_evaluation(mdp, pi)
    grad = np.asarray(vb.visitation)[:, None] * pi * vb.adv / (1.0 - mdp.gamma)
    return SoftmaxParams(params.theta + eta * grad)


def softmax_npg_step(params: SoftmaxParams, adv, eta: float) -> SoftmaxParams:
    """theta += eta * A, state by state."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    return SoftmaxParams(params.theta + eta * np.asarray(adv, dtype=float))


def mab_softmax_pg_step(theta, inst: MabInstance, eta: float) -> np.ndarray:
    pi = SoftmaxParams(theta).policy
    return _shifted(theta + eta * pi * inst.advantage(pi))


def mab_softmax_npg_step(theta, inst: MabInstance, eta: float) -> np.ndarray:
    pi = SoftmaxParams(theta).policy
    return _shifted(theta + eta * inst.advantage(pi))


def mab_hadamard_step(pi, inst: MabInstance, eta: float) -> np.ndarray:
    """Hadamard PG on a bandit, written directly in the policy domain."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    pi = np.asarray(pi, dtype=float)
    adv = inst.advantage(pi)
    num = pi * (1.0 + 2.0 * eta * adv) ** 2
    return num / (1.0 + 4.0 * eta**2 * np.dot(pi, adv**2))
