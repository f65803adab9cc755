"""Finite discounted MDPs: validation, exact policy evaluation and Bellman optimality.

Arrays follow the layout used throughout the package:

    transition[s, a, s']   P(s' | s, a)
    reward[s, a, s']       r(s, a, s')
    policy[s, a]           pi(a | s)

Everything here is exact linear algebra; nothing is sampled.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

STOCHASTIC_TOL = 1e-12
DIRECT_SOLVE_MAX_STATES = 512
ITERATIVE_RESIDUAL_TOL = 1e-12
ITERATIVE_MAX_SWEEPS = 1_000_000
DEFAULT_TIE_TOL = 1e-9


class MdpError(ValueError):
    """Base class for invalid MDP input."""


class RowNotStochastic(MdpError):
    pass


class RewardOutOfRange(MdpError):
    pass


class DegenerateInitial(MdpError):
    pass


class BadDiscount(MdpError):
    pass


class SingularSystem(ArithmeticError):
    pass


class NonConvergence(ArithmeticError):
    pass


def _frozen(x, dtype=float):
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TabularMdp:
    """Validated MDP tuple (S, A, P, r, gamma, mu).

    Construct through :func:`validate_mdp` (or :func:`load_mdp`); the
    constructor itself does not check anything.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    mu: np.ndarray
    expected_reward: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "mu", _frozen(self.mu))
        object.__setattr__(self, "gamma", float(self.gamma))
        rbar = (self.transition * self.reward).sum(axis=2)
        object.__setattr__(self, "expected_reward", _frozen(rbar))

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def mu_tilde(self) -> float:
        return float(self.mu.min())

    def to_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "gamma": self.gamma,
            "mu": self.mu.tolist(),
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
        }


def validate_mdp(transition, reward, gamma, mu, *, require_exploration=True) -> TabularMdp:
    """Check an MDP description and return it as a :class:`TabularMdp`.

    ``reward`` may be given per (s, a) and is then broadcast over next
    states. ``require_exploration=False`` admits initial distributions with
    zero entries; the convergence analysis needs min mu > 0.
    """
    P = np.asarray(transition, dtype=float)
    if P.ndim != 3 or P.shape[0] != P.shape[2] or P.shape[0] < 1 or P.shape[1] < 1:
        raise MdpError(f"transition must have shape (S, A, S), got {P.shape}")
    S, A, _ = P.shape
    R = np.asarray(reward, dtype=float)
    if R.shape == (S, A):
        R = np.repeat(R[:, :, None], S, axis=2)
    if R.shape != (S, A, S):
        raise MdpError(f"reward must have shape {(S, A, S)} or {(S, A)}, got {R.shape}")
    m = np.asarray(mu, dtype=float)
    if m.shape != (S,):
        raise MdpError(f"mu must have shape {(S,)}, got {m.shape}")

    gamma = float(gamma)
    if not 0.0 <= gamma < 1.0:
        raise BadDiscount(f"gamma must lie in [0, 1), got {gamma}")
    if not np.all(np.isfinite(P)) or (P < 0).any():
        raise RowNotStochastic("transition probabilities must be finite and nonnegative")
    row_err = np.abs(P.sum(axis=2) - 1.0)
    if (row_err > STOCHASTIC_TOL).any():
        s, a = np.unravel_index(np.argmax(row_err), row_err.shape)
        raise RowNotStochastic(f"transition row (s={s}, a={a}) sums to {P[s, a].sum()!r}")
    if not np.all(np.isfinite(R)) or (R < 0).any() or (R > 1).any():
        raise RewardOutOfRange("rewards must lie in [0, 1]")
    if (m < 0).any() or abs(m.sum() - 1.0) > STOCHASTIC_TOL:
        raise DegenerateInitial("mu must be a probability vector")
    if require_exploration and m.min() <= 0:
        raise DegenerateInitial("mu must be strictly positive on every state")
    return TabularMdp(P, R, gamma, m)


def mdp_from_dict(raw: dict, **kwargs) -> TabularMdp:
    try:
        S, A = int(raw["num_states"]), int(raw["num_actions"])
        mdp = validate_mdp(raw["transition"], raw["reward"], raw["gamma"], raw["mu"], **kwargs)
    except KeyError as exc:
        raise MdpError(f"missing field {exc.args[0]!r}") from None
    if (mdp.num_states, mdp.num_actions) != (S, A):
        raise MdpError(
            f"declared dimensions {(S, A)} do not match arrays {(mdp.num_states, mdp.num_actions)}"
        )
    return mdp


def load_mdp(path, **kwargs) -> TabularMdp:
    with open(path) as fh:
        return mdp_from_dict(json.load(fh), **kwargs)


def save_mdp(mdp: TabularMdp, path) -> None:
    Path(path).write_text(json.dumps(mdp.to_dict(), indent=1) + "\n")


def check_policy(mdp: TabularMdp, pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (mdp.num_states, mdp.num_actions):
        raise ValueError(f"policy shape {pi.shape} does not match MDP")
    if (pi < 0).any() or (np.abs(pi.sum(axis=1) - 1.0) > STOCHASTIC_TOL).any():
        raise ValueError("policy rows must be probability vectors")
    return pi


def uniform_policy(mdp: TabularMdp) -> np.ndarray:
    return np.full((mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions)


# ---------------------------------------------------------------------------
# Linear systems


def _solve_discounted(M, b, gamma):
    """Solve x = b + gamma * M @ x for a row- or column-stochastic M."""
    n = M.shape[0]
    if n <= DIRECT_SOLVE_MAX_STATES:
        try:
            x = np.linalg.solve(np.eye(n) - gamma * M, b)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
        if not np.all(np.isfinite(x)):
            raise SingularSystem("non-finite solution")
        return x
    x = b.copy()
    # gamma-contraction in sup norm (row-stochastic) or l1 norm (column-stochastic)
    for _ in range(ITERATIVE_MAX_SWEEPS):
        x_new = b + gamma * (M @ x)
        if np.max(np.abs(x_new - x)) <= ITERATIVE_RESIDUAL_TOL:
            return x_new
        x = x_new
    raise SingularSystem("fixed-point iteration did not reach residual tolerance")


def state_visitation(mdp: TabularMdp, pi, rho=None) -> np.ndarray:
    """Discounted state visitation d^pi_rho (defaults to rho = mu)."""
    rho = mdp.mu if rho is None else np.asarray(rho, dtype=float)
    P_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    return _solve_discounted(P_pi.T, (1.0 - mdp.gamma) * rho, mdp.gamma)


@dataclass(frozen=True)
class ValueBundle:
    v: np.ndarray
    q: np.ndarray
    adv: np.ndarray
    visitation: np.ndarray
    v_mu: float


def policy_evaluation(mdp: TabularMdp, pi) -> ValueBundle:
    """Exact V, Q, advantage and mu-visitation of a fixed policy."""
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (mdp.num_states, mdp.num_actions):
        raise ValueError(f"policy shape {pi.shape} does not match MDP")
    P, rbar, gamma = mdp.transition, mdp.expected_reward, mdp.gamma
    P_pi = np.einsum("sa,sat->st", pi, P)
    r_pi = np.einsum("sa,sa->s", pi, rbar)
    v = _solve_discounted(P_pi, r_pi, gamma)
    q = rbar + gamma * (P @ v)
    # one extra backup keeps sum_a pi(a|s) adv(s,a) at rounding level
    v = np.einsum("sa,sa->s", pi, q)
    adv = q - v[:, None]
    d = _solve_discounted(P_pi.T, (1.0 - gamma) * mdp.mu, gamma)
    return ValueBundle(_frozen(v), _frozen(q), _frozen(adv), _frozen(d), float(mdp.mu @ v))


# ---------------------------------------------------------------------------
# Optimality


@dataclass(frozen=True)
class OptimalBundle:
    v_star: np.ndarray
    q_star: np.ndarray
    optimal_mask: np.ndarray  # [s, a] True when a is in A*_s
    v_hat: np.ndarray
    v_tilde: np.ndarray
    residual: float

    @property
    def s_tilde(self) -> np.ndarray:
        """Indices of states that have at least one non-optimal action."""
        return np.flatnonzero(~self.optimal_mask.all(axis=1))

    def optimal_actions(self, s: int) -> set:
        return set(np.flatnonzero(self.optimal_mask[s]).tolist())


def bellman_residual(mdp: TabularMdp, v) -> float:
    backup = (mdp.expected_reward + mdp.gamma * (mdp.transition @ v)).max(axis=1)
    return float(np.max(np.abs(backup - v)))


def solve_optimal(mdp: TabularMdp, tol=1e-10, tie_tol=DEFAULT_TIE_TOL, max_iter=1_000_000) -> OptimalBundle:
    """Value iteration to a sup-norm Bellman residual of tol*(1-gamma)/(2*gamma).

    The greedy policy of the result is then evaluated exactly; when that
    value has a smaller residual it replaces the iterate.
    """
    if tol <= 0 or tie_tol <= 0:
        raise ValueError("tol and tie_tol must be positive")
    gamma, P, rbar = mdp.gamma, mdp.transition, mdp.expected_reward
    target = np.inf if gamma == 0 else tol * (1.0 - gamma) / (2.0 * gamma)
    v = np.zeros(mdp.num_states)
    for _ in range(max_iter):
        v_new = (rbar + gamma * (P @ v)).max(axis=1)
        res = np.max(np.abs(v_new - v))
        v = v_new
        if res <= target:
            break
    else:
        raise NonConvergence(f"value iteration residual {res:.3e} above target {target:.3e}")

    q = rbar + gamma * (P @ v)
    greedy = np.zeros_like(q)
    greedy[np.arange(mdp.num_states), q.argmax(axis=1)] = 1.0
    v_pol = policy_evaluation(mdp, greedy).v
    res_vi, res_pol = bellman_residual(mdp, v), bellman_residual(mdp, v_pol)
    if res_pol <= res_vi:
        v, res_vi = np.asarray(v_pol), res_pol
    q = rbar + gamma * (P @ v)
    v = q.max(axis=1)

    mask = q >= v[:, None] - tie_tol
    all_opt = mask.all(axis=1)
    v_hat = np.where(all_opt, 0.0, np.where(mask, np.inf, q).min(axis=1))
    v_tilde = np.where(all_opt, v, np.where(mask, -np.inf, q).max(axis=1))
    return OptimalBundle(
        _frozen(v), _frozen(q), _frozen(mask, bool), _frozen(v_hat), _frozen(v_tilde), res_vi
    )


def b_gap(pi, opt: OptimalBundle) -> np.ndarray:
    """Probability mass each state puts on non-optimal actions."""
    pi = np.asarray(pi, dtype=float)
    return np.where(opt.optimal_mask, 0.0, pi).sum(axis=1)


def performance_difference(mdp: TabularMdp, pi1, pi2, rho=None) -> float:
    """Right-hand side of the performance difference identity.

    Returns (1/(1-gamma)) E_{s~d_rho^{pi1}} E_{a~pi1}[A^{pi2}(s, a)], which
    equals V^{pi1}(rho) - V^{pi2}(rho).
    """
    d1 = state_visitation(mdp, pi1, rho)
    adv2 = policy_evaluation(mdp, pi2).adv
    return float(d1 @ np.einsum("sa,sa->s", pi1, adv2) / (1.0 - mdp.gamma))


def value_error_bound(mdp: TabularMdp, pi, opt: OptimalBundle, rho=None):
    """(lhs, rhs) of V*(rho) - V^pi(rho) <= max_s(V* - V_hat*)/(1-gamma) E_{d_rho^pi}[b]."""
    rho = mdp.mu if rho is None else np.asarray(rho, dtype=float)
    v = policy_evaluation(mdp, pi).v
    lhs = float(rho @ (opt.v_star - v))
    d = state_visitation(mdp, pi, rho)
    scale = float(np.max(opt.v_star - opt.v_hat)) / (1.0 - mdp.gamma)
    return lhs, scale * float(d @ b_gap(pi, opt))
