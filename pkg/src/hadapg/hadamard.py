"""Exact policy gradient under the Hadamard parameterization.

Two equivalent steppers are provided:

* :func:`hadamard_step` keeps one unit vector per state, pi(a|s) = theta[s, a]**2,
  and takes a Riemannian gradient step followed by renormalization.
* :func:`normalized_step` uses free rows, pi(a|s) = theta[s, a]**2 / |theta[s]|**2,
  and takes a plain gradient step on the per-iteration surrogate objective.

From the same starting policy both produce the same policy sequence.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import OptimalBundle, TabularMdp, ValueBundle, b_gap, policy_evaluation

SPHERE_TOL = 1e-12


class ZeroRow(ValueError):
    pass


class DegenerateParameter(ArithmeticError):
    """A parameter entry hit exactly zero, after which it can never move again."""


@dataclass(frozen=True)
class StepConfig:
    eta: float
    max_iters: int = 1000
    kappa: float | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"step size must be positive, got {self.eta}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.kappa is not None and not 0 < self.kappa < 1:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")

    @classmethod
    def from_kappa(cls, kappa: float, gamma: float, max_iters: int = 1000) -> "StepConfig":
        """eta = (1 - gamma)**2 * kappa / 4."""
        return cls(eta=(1.0 - gamma) ** 2 * kappa / 4.0, max_iters=max_iters, kappa=kappa)


def _readonly(x):
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SphereParams:
    theta: np.ndarray

    def __post_init__(self):
        theta = _readonly(self.theta)
        if theta.ndim != 2:
            raise ValueError("theta must be a (num_states, num_actions) array")
        if (np.abs(np.linalg.norm(theta, axis=1) - 1.0) > SPHERE_TOL).any():
            raise ValueError("every row of theta must have unit norm")
        if (theta == 0).any():
            raise DegenerateParameter("theta entries must be nonzero")
        object.__setattr__(self, "theta", theta)

    @property
    def policy(self) -> np.ndarray:
        return self.theta**2

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "SphereParams":
        return cls(np.full((num_states, num_actions), 1.0 / math.sqrt(num_actions)))

    @classmethod
    def random(cls, num_states: int, num_actions: int, seed: int) -> "SphereParams":
        rng = np.random.default_rng(seed)
        theta = rng.standard_normal((num_states, num_actions))
        while (theta == 0).any():
            theta[theta == 0] = rng.standard_normal()
        return cls(theta / np.linalg.norm(theta, axis=1, keepdims=True))

    @classmethod
    def from_policy(cls, pi) -> "SphereParams":
        """Positive square root of a strictly positive policy."""
        theta = np.sqrt(np.asarray(pi, dtype=float))
        return cls(theta / np.linalg.norm(theta, axis=1, keepdims=True))


@dataclass(frozen=True)
class FreeParams:
    theta: np.ndarray

    def __post_init__(self):
        theta = _readonly(self.theta)
        if theta.ndim != 2:
            raise ValueError("theta must be a (num_states, num_actions) array")
        if (np.linalg.norm(theta, axis=1) == 0).any():
            raise ZeroRow("every row of theta must have nonzero norm")
        object.__setattr__(self, "theta", theta)

    @property
    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.theta, axis=1)

    @property
    def policy(self) -> np.ndarray:
        sq = self.theta**2
        return sq / sq.sum(axis=1, keepdims=True)

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "FreeParams":
        return cls(np.full((num_states, num_actions), 1.0 / math.sqrt(num_actions)))


def _scale(mdp: TabularMdp, vb: ValueBundle) -> np.ndarray:
    return 2.0 * np.asarray(vb.visitation) / (1.0 - mdp.gamma)


def riemannian_gradient(mdp: TabularMdp, params: SphereParams, vb: ValueBundle) -> np.ndarray:
    """Tangent-space gradient g[s, a] = 2 d(s) theta[s, a] A(s, a) / (1 - gamma)."""
    return _scale(mdp, vb)[:, None] * params.theta * vb.adv


def surrogate_gradient(mdp: TabularMdp, params: FreeParams, vb: ValueBundle) -> np.ndarray:
    """Gradient of :func:`surrogate_objective` at ``theta = params.theta``.

    Same expression as the Riemannian gradient, evaluated on free rows.
    """
    return _scale(mdp, vb)[:, None] * params.theta * vb.adv


def surrogate_objective(mdp: TabularMdp, theta, anchor: FreeParams, vb: ValueBundle) -> float:
    """Per-iteration objective of the normalized parameterization.

    (1/(1-gamma)) sum_s d(s) |anchor_s|^2 sum_a pi_theta(a|s) A(s, a), with the
    visitation, advantage and anchor norms frozen at the current iterate.
    """
    theta = np.asarray(theta, dtype=float)
    sq = theta**2
    pi = sq / sq.sum(axis=1, keepdims=True)
    inner = np.einsum("sa,sa->s", pi, vb.adv)
    return float(np.sum(vb.visitation * anchor.row_norms**2 * inner) / (1.0 - mdp.gamma))


def hadamard_step(mdp: TabularMdp, params: SphereParams, cfg: StepConfig, vb: ValueBundle | None = None):
    """One Riemannian gradient ascent step on the product of spheres.

    Returns ``(new_params, new_policy)``.
    """
    if vb is None:
        vb = policy_evaluation(mdp, params.policy)
    g = riemannian_gradient(mdp, params, vb)
    theta = params.theta + cfg.eta * g
    if (theta == 0).any():
        s, a = np.argwhere(theta == 0)[0]
        raise DegenerateParameter(f"theta[{s}, {a}] became exactly zero; step size outside the valid regime")
    theta = theta / np.linalg.norm(theta, axis=1, keepdims=True)
    new = SphereParams(theta)
    return new, new.policy


def normalized_step(mdp: TabularMdp, params: FreeParams, cfg: StepConfig, vb: ValueBundle | None = None):
    """One plain gradient ascent step under the normalized parameterization.

    Returns ``(new_params, new_policy)``. Row norms never shrink because the
    gradient is orthogonal to each row.
    """
    if vb is None:
        vb = policy_evaluation(mdp, params.policy)
    new = FreeParams(params.theta + cfg.eta * surrogate_gradient(mdp, params, vb))
    return new, new.policy


def policy_delta(mdp: TabularMdp, pi, vb: ValueBundle, cfg: StepConfig) -> np.ndarray:
    """Closed form of pi_next - pi for one Hadamard step, computed in the policy domain."""
    pi = np.asarray(pi, dtype=float)
    c = cfg.eta * np.asarray(vb.visitation) / (1.0 - mdp.gamma)  # eta d(s) / (1 - gamma)
    adv = np.asarray(vb.adv)
    ex_sq = np.einsum("sa,sa->s", pi, adv**2)
    denom = 1.0 + 4.0 * c**2 * ex_sq  # 1 + eta^2 |g_s|^2
    inner = adv + c[:, None] * (adv**2 - ex_sq[:, None])
    return pi / denom[:, None] * 4.0 * c[:, None] * inner


# ---------------------------------------------------------------------------
# Runs


@dataclass(frozen=True)
class IterRecord:
    k: int
    policy: np.ndarray
    v: np.ndarray
    v_mu: float
    visitation: np.ndarray
    b: np.ndarray
    grad_norm: np.ndarray
    exp_sq_adv: np.ndarray
    delta: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "policy": self.policy.tolist(),
            "v": self.v.tolist(),
            "v_mu": self.v_mu,
            "visitation": self.visitation.tolist(),
            "b": self.b.tolist(),
            "grad_norm": self.grad_norm.tolist(),
            "exp_sq_adv": self.exp_sq_adv.tolist(),
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "IterRecord":
        arrays = {name: _readonly(raw[name]) for name in
                  ("policy", "v", "visitation", "b", "grad_norm", "exp_sq_adv")}
        return cls(k=int(raw["k"]), v_mu=float(raw["v_mu"]), delta=float(raw["delta"]), **arrays)


@dataclass
class RunTrace:
    """Per-iteration diagnostics of one run, indexed k = 0, 1, ..., max_iters."""

    eta: float
    kappa: float | None
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def num_states(self) -> int:
        return self.records[0].b.shape[0]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def v_mu(self) -> np.ndarray:
        return self.column("v_mu")

    @property
    def deltas(self) -> np.ndarray:
        return self.column("delta")

    @property
    def b(self) -> np.ndarray:
        return self.column("b")

    @property
    def policies(self) -> np.ndarray:
        return self.column("policy")

    def csv_header(self) -> list:
        S = self.num_states
        return (["k", "v_mu", "delta_k"] + [f"b_{s}" for s in range(S)]
                + [f"grad_norm_{s}" for s in range(S)])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.csv_header())
            for r in self.records:
                writer.writerow([r.k, repr(r.v_mu), repr(r.delta)]
                                + [repr(float(x)) for x in r.b]
                                + [repr(float(x)) for x in r.grad_norm])

    def to_dict(self) -> dict:
        return {"eta": self.eta, "kappa": self.kappa,
                "records": [r.to_dict() for r in self.records]}

    @classmethod
    def from_dict(cls, raw: dict) -> "RunTrace":
        trace = cls(eta=float(raw["eta"]), kappa=raw.get("kappa"),
                    records=[IterRecord.from_dict(r) for r in raw["records"]])
        ks = [r.k for r in trace.records]
        if ks != list(range(len(ks))):
            raise ValueError("trace iteration indices must be contiguous from 0")
        return trace


def _record(k, mdp, params, vb, opt, grad):
    pi = params.policy
    return IterRecord(
        k=k,
        policy=_readonly(pi),
        v=vb.v,
        v_mu=vb.v_mu,
        visitation=vb.visitation,
        b=_readonly(b_gap(pi, opt)),
        grad_norm=_readonly(np.linalg.norm(grad, axis=1)),
        exp_sq_adv=_readonly(np.einsum("sa,sa->s", pi, np.asarray(vb.adv) ** 2)),
        delta=float(mdp.mu @ opt.v_star) - vb.v_mu,
    )


def _stepper(params):
    if isinstance(params, SphereParams):
        return hadamard_step, riemannian_gradient
    if isinstance(params, FreeParams):
        return normalized_step, surrogate_gradient
    raise TypeError(f"unsupported parameter type {type(params).__name__}")


def run(mdp: TabularMdp, init, cfg: StepConfig, opt: OptimalBundle) -> RunTrace:
    """Run ``cfg.max_iters`` exact steps and record every iterate.

    ``init`` selects the algorithm: :class:`SphereParams` for the projected
    update, :class:`FreeParams` for the normalized one.
    """
    step, grad_fn = _stepper(init)
    trace = RunTrace(eta=cfg.eta, kappa=cfg.kappa)
    params = init
    for k in range(cfg.max_iters + 1):
        vb = policy_evaluation(mdp, params.policy)
        trace.records.append(_record(k, mdp, params, vb, opt, grad_fn(mdp, params, vb)))
        if k < cfg.max_iters:
            params, _ = step(mdp, params, cfg, vb)
    return trace


def iterations_to_tolerance(mdp: TabularMdp, init, cfg: StepConfig, opt: OptimalBundle, target: float):
    """First k <= cfg.max_iters with V*(mu) - V^k(mu) <= target, or None."""
    step, _ = _stepper(init)
    v_star_mu = float(mdp.mu @ opt.v_star)
    params = init
    for k in range(cfg.max_iters + 1):
        vb = policy_evaluation(mdp, params.policy)
        if v_star_mu - vb.v_mu <= target:
            return k
        if k < cfg.max_iters:
            params, _ = step(mdp, params, cfg, vb)
    return None
