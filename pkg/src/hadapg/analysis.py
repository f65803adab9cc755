"""Convergence constants for Hadamard PG and an auditor for recorded runs.

The auditor replays every inequality the convergence analysis relies on
against a :class:`~hadapg.hadamard.RunTrace` and reports, per check, the
largest observed ``lhs - rhs`` (positive means violated) and where it
occurred.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .hadamard import RunTrace
from .mdp import OptimalBundle, TabularMdp


class Marker(enum.Enum):
    NOT_APPLICABLE = "NotApplicable"

    def __repr__(self):
        return self.value


NA = Marker.NOT_APPLICABLE


@dataclass(frozen=True)
class TheoremConstants:
    kappa: float
    gamma: float
    mu_tilde: float
    lambda_hat: float
    g_value: float
    g_statement: float
    improvement_coef: float
    m1: float | Marker
    k0: float | Marker
    rho_prefactor: float | Marker
    c_global: float
    # trajectory-dependent; filled in by bind()
    rho: float | Marker = NA
    c_local: float | Marker = NA

    def bind(self, b_half_max: float, b_k0_max: float) -> "TheoremConstants":
        """Attach the run-dependent terms max_s b at ceil(k0/2) and ceil(k0)."""
        if self.rho_prefactor is NA:
            return self
        return replace(self, rho=self.rho_prefactor * (1.0 - b_half_max),
                       c_local=self.c_global * b_k0_max)

    def to_dict(self) -> dict:
        return {k: (v.value if isinstance(v, Marker) else v) for k, v in asdict(self).items()}


def compute_constants(mdp: TabularMdp, opt: OptimalBundle, kappa: float, lambda_hat: float) -> TheoremConstants:
    """Rate constants of the sublinear and linear bounds.

    ``g_value`` carries (1 - gamma)**4, which is what the sublinear argument
    actually produces; ``g_statement`` is the (1 - gamma**4) variant, kept
    for comparison only.
    """
    if not 0 < kappa < 1:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    if not 0 < lambda_hat <= 1:
        raise ValueError(f"lambda_hat must lie in (0, 1], got {lambda_hat}")
    gamma, mu_t = mdp.gamma, mdp.mu_tilde
    denom = 4.0 + kappa**2
    g = 3.0 * kappa * mu_t**2 * (1.0 - gamma) ** 4 * lambda_hat / denom
    g_stmt = 3.0 * kappa * mu_t**2 * (1.0 - gamma**4) * lambda_hat / denom
    improvement = 3.0 * kappa * mu_t**2 * (1.0 - gamma) ** 2 / denom
    c_global = float(np.max(opt.v_star - opt.v_hat)) / (1.0 - gamma)

    s_tilde = opt.s_tilde
    if s_tilde.size == 0:
        m1 = k0 = rho_pre = NA
    else:
        gap = float(np.min((opt.v_star - opt.v_tilde)[s_tilde]))
        m1 = gap * (1.0 - kappa / 2.0
                    + kappa * (1.0 - gamma) ** 2 * mu_t / 4.0 * float(np.min(opt.v_star + opt.v_hat)))
        k0 = 8.0 * gamma / g / (mu_t * m1)
        rho_pre = (1.0 - gamma) ** 2 * kappa * mu_t / denom * m1
    return TheoremConstants(
        kappa=float(kappa), gamma=gamma, mu_tilde=mu_t, lambda_hat=float(lambda_hat),
        g_value=g, g_statement=g_stmt, improvement_coef=improvement,
        m1=m1, k0=k0, rho_prefactor=rho_pre, c_global=c_global,
    )


def estimate_lambda(trace: RunTrace) -> float:
    """Running minimum over the trace of min_s (1 - b_s^k)."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    return float(np.min(1.0 - trace.b))


# ---------------------------------------------------------------------------
# Audit


@dataclass
class CheckResult:
    name: str
    status: str  # "pass" | "fail" | "skipped"
    tolerance: float
    worst_violation: float | None = None
    at_iteration: int | None = None
    note: str | None = None
    informational: bool = False

    def to_dict(self) -> dict:
        out = {"name": self.name, "status": self.status, "tolerance": self.tolerance,
               "worst_violation": self.worst_violation, "at_iteration": self.at_iteration}
        if self.note:
            out["note"] = self.note
        if self.informational:
            out["informational"] = True
        return out


@dataclass
class AuditReport:
    constants: TheoremConstants
    checks: list = field(default_factory=list)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks if not c.informational)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "constants": self.constants.to_dict(),
                "checks": [c.to_dict() for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"


def _judge(name, excess, iterations, tol, **kw) -> CheckResult:
    """Summarise per-iteration ``lhs - rhs`` values into a check result."""
    excess = np.asarray(excess, dtype=float)
    if excess.size == 0:
        return CheckResult(name, "skipped", tol, note="no iterations to check", **kw)
    flat = excess.reshape(len(iterations), -1).max(axis=1)
    i = int(np.argmax(flat))
    worst = float(flat[i])
    return CheckResult(name, "fail" if worst > tol else "pass", tol, worst, int(iterations[i]), **kw)


def audit(trace: RunTrace, mdp: TabularMdp, opt: OptimalBundle, consts: TheoremConstants,
          tol: float = 1e-8) -> AuditReport:
    """Check a recorded run against every bound of the convergence analysis."""
    n = len(trace)
    if n == 0:
        raise ValueError("empty trace")
    K = n - 1
    v_mu = trace.v_mu
    delta = float(mdp.mu @ opt.v_star) - v_mu
    b = trace.b
    ks = np.arange(n)
    steps = ks[1:]
    checks = []

    checks.append(_judge("monotonicity", v_mu[:-1] - v_mu[1:], steps, tol))
    sq_adv = trace.column("exp_sq_adv").sum(axis=1)
    checks.append(_judge("improvement_lower_bound",
                         consts.improvement_coef * sq_adv[:-1] - (v_mu[1:] - v_mu[:-1]), steps, tol))

    for name, g, info in (("sublinear", consts.g_value, False),
                          ("sublinear_half_lambda", consts.g_value / 2.0, False),
                          ("sublinear_statement_form", consts.g_statement, True)):
        checks.append(_judge(name, delta[1:] - 1.0 / (g * steps), steps, tol, informational=info))

    # b-weighted value error, per record
    vis_b = np.einsum("ks,ks->k", trace.column("visitation"), b)
    checks.append(_judge("value_error_bgap", delta - consts.c_global * vis_b, ks, tol))
    max_err = np.max(opt.v_star[None, :] - trace.column("v"), axis=1)
    checks.append(_judge("max_error_bound", max_err - delta / consts.mu_tilde, ks, tol))

    linear = ("linear_local", "linear_global", "bgap_monotone_after_k0")
    if consts.k0 is NA:
        for name in linear:
            checks.append(CheckResult(name, "skipped", tol,
                                      note="NotApplicable: every action is optimal in every state"))
    elif math.ceil(consts.k0) > K:
        for name in linear:
            checks.append(CheckResult(name, "skipped", tol,
                                      note=f"TraceTooShort: ceil(k0) = {math.ceil(consts.k0)} > {K}"))
    else:
        # the b-recursion starts from an actual iterate, so k0 enters as ceil(k0) throughout
        k0_int = math.ceil(consts.k0)
        consts = consts.bind(float(b[math.ceil(consts.k0 / 2)].max()), float(b[k0_int].max()))
        decay = np.power(1.0 - consts.rho, ks - k0_int)
        late = ks[k0_int:]
        checks.append(_judge("linear_local", delta[k0_int:] - consts.c_local * decay[k0_int:], late, tol))
        checks.append(_judge("linear_global", delta - consts.c_global * decay, ks, tol))
        checks.append(_judge("bgap_monotone_after_k0", b[k0_int + 1:] - b[k0_int:-1],
                             ks[k0_int + 1:], tol))
    return AuditReport(consts, checks)
