"""Random instances and experiment orchestration.

All randomness comes from numpy's PCG64 generator (``np.random.default_rng``)
seeded with a single integer, so results replicate across platforms. Instance
``i`` of an experiment with seed ``s`` uses seed ``s + i``.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import AuditReport, audit, compute_constants, estimate_lambda
from .baselines import MabInstance, SoftmaxParams, mab_hadamard_step, mab_softmax_npg_step, mab_softmax_pg_step
from .hadamard import RunTrace, SphereParams, StepConfig, run
from .mdp import MdpError, TabularMdp, load_mdp, mdp_from_dict, solve_optimal, validate_mdp

log = logging.getLogger(__name__)

MAB_METHODS = ("hadamard_pg", "softmax_pg", "softmax_npg")
# log10 of an exactly-zero error is reported at the smallest normal double
LOG_ERROR_FLOOR = np.finfo(float).tiny


class InvalidSpec(ValueError):
    pass


class IoFailure(OSError):
    pass


def generate_random_mdp(seed: int, num_states: int, num_actions: int, gamma: float) -> TabularMdp:
    """Transition rows from normalized (0, 1] uniforms, r(s, a) ~ U[0, 1), uniform mu."""
    if num_states < 1 or num_actions < 1:
        raise ValueError("dimensions must be at least 1")
    rng = np.random.default_rng(seed)
    P = 1.0 - rng.random((num_states, num_actions, num_states))
    P /= P.sum(axis=2, keepdims=True)
    r = rng.random((num_states, num_actions))
    mu = np.full(num_states, 1.0 / num_states)
    return validate_mdp(P, r, gamma, mu)


def generate_random_mab(seed: int, k_arms: int) -> MabInstance:
    if k_arms < 1:
        raise ValueError("k_arms must be at least 1")
    return MabInstance(np.random.default_rng(seed).random(k_arms))


# ---------------------------------------------------------------------------
# Bandit comparison


def mab_error_curves(inst: MabInstance, eta: float, iterations: int) -> dict:
    """Per-iteration value error of the three bandit methods from uniform starts."""
    K = inst.num_arms
    pi = np.full(K, 1.0 / K)
    logits_pg = np.zeros(K)
    logits_npg = np.zeros(K)
    curves = {m: np.empty(iterations + 1) for m in MAB_METHODS}
    for k in range(iterations + 1):
        curves["hadamard_pg"][k] = inst.value_error(pi)
        curves["softmax_pg"][k] = inst.value_error(SoftmaxParams(logits_pg).policy)
        curves["softmax_npg"][k] = inst.value_error(SoftmaxParams(logits_npg).policy)
        if k < iterations:
            pi = mab_hadamard_step(pi, inst, eta)
            logits_pg = mab_softmax_pg_step(logits_pg, inst, eta)
            logits_npg = mab_softmax_npg_step(logits_npg, inst, eta)
    return curves


def mab_compare(seed: int, k_arms: int, instances: int, eta: float, iterations: int) -> dict:
    """Mean and (population) std of log10 value error across random instances.

    Returns ``{method: (mean, std)}`` with arrays of length ``iterations + 1``.
    """
    logs = {m: [] for m in MAB_METHODS}
    for i in range(instances):
        curves = mab_error_curves(generate_random_mab(seed + i, k_arms), eta, iterations)
        for m in MAB_METHODS:
            logs[m].append(np.log10(np.maximum(curves[m], LOG_ERROR_FLOOR)))
    return {m: (np.mean(v, axis=0), np.std(v, axis=0)) for m, v in logs.items()}


# ---------------------------------------------------------------------------
# Experiments


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str  # "mdp-run" | "mab-compare" | "audit"
    out: Path
    seed: int = 0
    num_states: int = 4
    num_actions: int = 3
    arms: tuple = (2, 5, 20, 50)
    gamma: float = 0.9
    kappa: float | None = 0.5
    eta: float | None = None
    iterations: int = 500
    instances: int = 1
    format: str = "csv"
    mdp_file: Path | None = None
    trace_file: Path | None = None
    tol: float = 1e-8

    def validate(self) -> None:
        if self.mode not in ("mdp-run", "mab-compare", "audit"):
            raise InvalidSpec(f"unknown mode {self.mode!r}")
        if self.format not in ("csv", "json"):
            raise InvalidSpec(f"unknown format {self.format!r}")
        if not 0 <= self.seed < 2**64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")
        if self.iterations < 0 or self.instances < 1:
            raise InvalidSpec("iterations must be >= 0 and instances >= 1")
        if not self.tol > 0:
            raise InvalidSpec("tol must be positive")
        if self.mode == "mdp-run":
            if self.eta is not None:
                raise InvalidSpec("mdp-run is driven by kappa; --eta is only for mab-compare")
            if self.kappa is None or not 0 < self.kappa < 1:
                raise InvalidSpec("kappa must lie in (0, 1)")
            if self.mdp_file is None:
                if self.num_states < 1 or self.num_actions < 1:
                    raise InvalidSpec("states and actions must be >= 1")
                if not 0 <= self.gamma < 1:
                    raise InvalidSpec("gamma must lie in [0, 1)")
            elif self.instances != 1:
                raise InvalidSpec("--mdp-file runs a single instance")
        elif self.mode == "mab-compare":
            if self.eta is None or not self.eta > 0:
                raise InvalidSpec("mab-compare needs a positive --eta")
            if not self.arms or min(self.arms) < 1:
                raise InvalidSpec("arm counts must be >= 1")
        elif self.trace_file is None:
            raise InvalidSpec("audit mode needs a trace file")


def audit_trace(mdp: TabularMdp, trace: RunTrace, tol: float = 1e-8) -> AuditReport:
    opt = solve_optimal(mdp)
    consts = compute_constants(mdp, opt, trace.kappa, estimate_lambda(trace))
    return audit(trace, mdp, opt, consts, tol)


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _run_mdp(spec: ExperimentSpec):
    written, passed = [], True
    for i in range(spec.instances):
        seed = spec.seed + i
        if spec.mdp_file is not None:
            try:
                mdp = load_mdp(spec.mdp_file)
            except OSError as exc:
                raise IoFailure(f"cannot read {spec.mdp_file}: {exc}") from exc
        else:
            mdp = generate_random_mdp(seed, spec.num_states, spec.num_actions, spec.gamma)
        cfg = StepConfig.from_kappa(spec.kappa, mdp.gamma, spec.iterations)
        opt = solve_optimal(mdp)
        init = SphereParams.uniform(mdp.num_states, mdp.num_actions)
        trace = run(mdp, init, cfg, opt)
        report = audit_trace(mdp, trace, spec.tol)
        passed &= report.passed
        log.info("instance %d: final delta %.3e, audit %s", i, trace.deltas[-1],
                 "passed" if report.passed else "FAILED")

        stem = spec.out / f"instance{i:03d}"
        doc = {"seed": seed, "mdp": mdp.to_dict(), "trace": trace.to_dict()}
        _write(stem.with_name(stem.name + "_trace.json"), json.dumps(doc) + "\n")
        _write(stem.with_name(stem.name + "_audit.json"), report.to_json())
        written += [stem.with_name(stem.name + "_trace.json"), stem.with_name(stem.name + "_audit.json")]
        if spec.format == "csv":
            path = stem.with_name(stem.name + "_trace.csv")
            try:
                trace.write_csv(path)
            except OSError as exc:
                raise IoFailure(f"cannot write {path}: {exc}") from exc
            written.append(path)
    return written, passed


def load_trace_file(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"{path} is not valid JSON: {exc}") from exc
    try:
        return mdp_from_dict(doc["mdp"]), RunTrace.from_dict(doc["trace"])
    except (KeyError, TypeError) as exc:
        raise InvalidSpec(f"{path} is not a trace file: missing {exc}") from exc


def _reaudit(spec: ExperimentSpec):
    mdp, trace = load_trace_file(spec.trace_file)
    if trace.kappa is None:
        raise InvalidSpec("trace has no kappa; only kappa-driven runs can be audited")
    report = audit_trace(mdp, trace, spec.tol)
    path = spec.out / (Path(spec.trace_file).name.replace("_trace.json", "") + "_reaudit.json")
    _write(path, report.to_json())
    return [path], report.passed


def _run_mab(spec: ExperimentSpec):
    written = []
    summary = {}
    for K in spec.arms:
        stats = mab_compare(spec.seed, K, spec.instances, spec.eta, spec.iterations)
        summary[str(K)] = {m: float(mean[-1]) for m, (mean, _) in stats.items()}
        if spec.format == "csv":
            rows = ["k,method,mean_log10_err,std_log10_err"]
            for m in MAB_METHODS:
                mean, std = stats[m]
                rows += [f"{k},{m},{mean[k]!r},{std[k]!r}" for k in range(spec.iterations + 1)]
            path = spec.out / f"mab_K{K}.csv"
            _write(path, "\n".join(rows) + "\n")
        else:
            doc = {m: {"mean_log10_err": mean.tolist(), "std_log10_err": std.tolist()}
                   for m, (mean, std) in stats.items()}
            path = spec.out / f"mab_K{K}.json"
            _write(path, json.dumps(doc) + "\n")
        written.append(path)
        log.info("K=%d final mean log10 error: %s", K, summary[str(K)])
    path = spec.out / "mab_summary.json"
    _write(path, json.dumps({"eta": spec.eta, "iterations": spec.iterations,
                             "instances": spec.instances, "final_mean_log10_err": summary},
                            indent=2) + "\n")
    return written + [path], True


def run_experiment(spec: ExperimentSpec):
    """Execute an experiment; returns ``(written_paths, all_audits_passed)``."""
    spec.validate()
    try:
        if spec.mode == "mdp-run":
            return _run_mdp(spec)
        if spec.mode == "audit":
            return _reaudit(spec)
        return _run_mab(spec)
    except MdpError as exc:
        raise InvalidSpec(str(exc)) from exc
