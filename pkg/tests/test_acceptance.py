"""Acceptance suite: one PASS/FAIL line per criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` or ``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from hadapg.analysis import NA, audit, compute_constants, estimate_lambda
from hadapg.bench import generate_random_mdp, mab_compare
from hadapg.hadamard import (
    FreeParams, SphereParams, StepConfig, hadamard_step, iterations_to_tolerance, normalized_step,
    policy_delta, riemannian_gradient, run, surrogate_gradient, surrogate_objective,
)
from hadapg.mdp import performance_difference, policy_evaluation, solve_optimal

SEEDS = range(20)
ITERS = 500


def report(capsys, number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


@lru_cache(maxsize=None)
def paired_runs():
    """Both algorithms on the 20 equivalence instances (|S|=4, |A|=3, gamma=0.9, kappa=0.5)."""
    out = []
    start = time.perf_counter()
    for seed in SEEDS:
        m = generate_random_mdp(seed, 4, 3, 0.9)
        opt = solve_optimal(m)
        cfg = StepConfig.from_kappa(0.5, m.gamma, ITERS)
        t1 = run(m, SphereParams.uniform(4, 3), cfg, opt)
        t2 = run(m, FreeParams.uniform(4, 3), cfg, opt)
        out.append((m, opt, t1, t2))
    return out, time.perf_counter() - start


def criterion_1(capsys=None):
    runs, elapsed = paired_runs()
    worst = max(float(np.max(np.abs(t1.policies - t2.policies))) for _, _, t1, t2 in runs)
    ok = worst <= 1e-9 and elapsed < 10
    return report(capsys, 1, ok, f"max |pi_sphere - pi_normalized| = {worst:.3e} (<= 1e-9) over 20 x {ITERS} "
                  f"iterations; runtime {elapsed:.2f} s (< 10 s)")


def criterion_2(capsys=None):
    runs, _ = paired_runs()
    worst = -np.inf
    for m, _, t1, _ in runs:
        coef = 3 * 0.5 * m.mu_tilde**2 * (1 - m.gamma) ** 2 / (4 + 0.5**2)
        sq = t1.column("exp_sq_adv").sum(axis=1)
        gain = np.diff(t1.v_mu)
        worst = max(worst, float(np.max(coef * sq[:-1] - gain)))
    ok = worst <= 1e-10
    return report(capsys, 2, ok, f"worst shortfall of V^(k+1)(mu) - V^k(mu) below the improvement "
                  f"bound = {worst:.3e} (<= 1e-10)")


def criterion_3(capsys=None):
    runs, _ = paired_runs()
    worst = -np.inf
    for m, opt, t1, _ in runs:
        consts = compute_constants(m, opt, 0.5, estimate_lambda(t1))
        ks = np.arange(1, ITERS + 1)
        delta = float(m.mu @ opt.v_star) - t1.v_mu[1:]
        worst = max(worst, float(np.max(delta - 1.0 / (consts.g_value * ks))))
    ok = worst <= 1e-8
    return report(capsys, 3, ok, f"worst delta_k - 1/(g k) = {worst:.3e} (<= 1e-8) for 1 <= k <= {ITERS}")


def criterion_4(capsys=None):
    k0s, applicable, violations = [], 0, []
    for seed in SEEDS:
        m = generate_random_mdp(seed, 4, 3, 0.8)
        opt = solve_optimal(m)
        trace = run(m, SphereParams.uniform(4, 3), StepConfig.from_kappa(0.9, m.gamma, ITERS), opt)
        consts = compute_constants(m, opt, 0.9, estimate_lambda(trace))
        check = audit(trace, m, opt, consts, tol=1e-8)["linear_global"]
        k0s.append(math.inf if consts.k0 is NA else consts.k0)
        if check.status != "skipped":
            applicable += 1
            if check.status == "fail":
                violations.append((seed, check.worst_violation))
    ok = applicable >= 5 and not violations
    return report(capsys, 4, ok, f"{applicable}/20 instances reach k0 <= {ITERS} (need >= 5); "
                  f"k0 range [{min(k0s):.3e}, {max(k0s):.3e}]; violations {violations}")


def criterion_5(capsys=None):
    rng = np.random.default_rng(2024)
    worst_rel, worst_tan = 0.0, 0.0
    h = 1e-6
    for i in range(50):
        S, A = int(rng.integers(1, 6)), int(rng.integers(2, 5))
        m = generate_random_mdp(1000 + i, S, A, float(rng.uniform(0, 0.95)))
        theta = rng.standard_normal((S, A)) * rng.uniform(0.5, 3.0)
        params = FreeParams(theta)
        vb = policy_evaluation(m, params.policy)
        analytic = surrogate_gradient(m, params, vb)
        fd = np.zeros_like(theta)
        for idx in np.ndindex(theta.shape):
            up, down = theta.copy(), theta.copy()
            up[idx] += h
            down[idx] -= h
            fd[idx] = (surrogate_objective(m, up, params, vb) - surrogate_objective(m, down, params, vb)) / (2 * h)
        worst_rel = max(worst_rel, float(np.linalg.norm(fd - analytic) / np.linalg.norm(analytic)))

        sphere = SphereParams(theta / np.linalg.norm(theta, axis=1, keepdims=True))
        g = riemannian_gradient(m, sphere, policy_evaluation(m, sphere.policy))
        worst_tan = max(worst_tan, float(np.max(np.abs(np.einsum("sa,sa->s", g, sphere.theta)))))
    # tangency along the equivalence runs as well
    worst_tan = max(worst_tan, structural_sweep()["tangency"])
    ok = worst_rel <= 1e-5 and worst_tan <= 1e-12
    return report(capsys, 5, ok, f"finite-difference relative error {worst_rel:.3e} (<= 1e-5) on 50 pairs; "
                  f"max |<g_s, theta_s>| = {worst_tan:.3e} (<= 1e-12)")


@lru_cache(maxsize=None)
def structural_sweep():
    """Step-by-step identities along both algorithms on the 20 equivalence instances."""
    w = dict(sphere=0.0, norm_shrink=-np.inf, cap=-np.inf, delta_recon=0.0, visitation=-np.inf, tangency=0.0)
    for seed in SEEDS:
        m = generate_random_mdp(seed, 4, 3, 0.9)
        cfg = StepConfig.from_kappa(0.5, m.gamma, ITERS)
        p, f = SphereParams.uniform(4, 3), FreeParams.uniform(4, 3)
        for _ in range(ITERS):
            vb = policy_evaluation(m, p.policy)
            g = riemannian_gradient(m, p, vb)
            w["tangency"] = max(w["tangency"], float(np.max(np.abs(np.einsum("sa,sa->s", g, p.theta)))))
            w["cap"] = max(w["cap"], float(np.max(cfg.eta**2 * (g**2).sum(axis=1) - cfg.kappa**2 / 4)))
            w["visitation"] = max(w["visitation"], float(np.max((1 - m.gamma) * m.mu - vb.visitation)))
            delta = policy_delta(m, p.policy, vb, cfg)
            p_new, pi_new = hadamard_step(m, p, cfg, vb)
            w["delta_recon"] = max(w["delta_recon"], float(np.max(np.abs(p.policy + delta - pi_new))))
            w["sphere"] = max(w["sphere"], float(np.max(np.abs(np.linalg.norm(p_new.theta, axis=1) - 1))))
            f_new, _ = normalized_step(m, f, cfg)
            w["norm_shrink"] = max(w["norm_shrink"], float(np.max(f.row_norms - f_new.row_norms)))
            p, f = p_new, f_new
    return w


def criterion_6(capsys=None):
    w = structural_sweep()
    rng = np.random.default_rng(77)
    pd_err = 0.0
    for i in range(50):
        S, A = int(rng.integers(1, 7)), int(rng.integers(1, 6))
        m = generate_random_mdp(5000 + i, S, A, float(rng.uniform(0, 0.95)))
        pis = [rng.random((S, A)) + 1e-3 for _ in range(2)]
        pis = [pi / pi.sum(axis=1, keepdims=True) for pi in pis]
        rho = rng.random(S)
        rho /= rho.sum()
        direct = rho @ (policy_evaluation(m, pis[0]).v - policy_evaluation(m, pis[1]).v)
        pd_err = max(pd_err, abs(performance_difference(m, pis[0], pis[1], rho) - direct))
    ok = (w["sphere"] <= 1e-12 and w["norm_shrink"] <= 0 and w["cap"] <= 1e-12
          and w["delta_recon"] <= 1e-10 and w["visitation"] <= 1e-12 and pd_err <= 1e-8)
    return report(capsys, 6, ok,
                  f"sphere norm error {w['sphere']:.1e} (<= 1e-12); normalized-update norm shrink {w['norm_shrink']:.1e} (<= 0); "
                  f"step cap excess {w['cap']:.1e} (<= 1e-12); policy-delta reconstruction {w['delta_recon']:.1e} (<= 1e-10); "
                  f"visitation deficit {w['visitation']:.1e} (<= 1e-12); performance difference error "
                  f"{pd_err:.1e} (<= 1e-8)")


def criterion_7(capsys=None):
    start = time.perf_counter()
    finals = {}
    for K in (2, 5, 20, 50):
        stats = mab_compare(0, K, 10, 0.4, 1000)
        finals[K] = (float(stats["hadamard_pg"][0][-1]), float(stats["softmax_pg"][0][-1]))
    elapsed = time.perf_counter() - start
    ok = all(h < s for h, s in finals.values()) and elapsed < 30
    detail = "; ".join(f"K={K}: {h:.2f} vs {s:.2f}" for K, (h, s) in finals.items())
    return report(capsys, 7, ok, f"final mean log10 error Hadamard vs softmax PG: {detail}; runtime {elapsed:.2f} s (< 30 s)")


def criterion_8(capsys=None):
    hits = []
    for seed in SEEDS:
        m = generate_random_mdp(seed, 4, 3, 0.8)
        opt = solve_optimal(m)
        cfg = StepConfig.from_kappa(0.9, m.gamma, 50_000)
        hits.append(iterations_to_tolerance(m, SphereParams.uniform(4, 3), cfg, opt, 1e-6))
    ok = all(k is not None for k in hits)
    worst = max((k for k in hits if k is not None), default=None)
    return report(capsys, 8, ok, f"{sum(k is not None for k in hits)}/20 runs reach delta <= 1e-6 within "
                  f"5e4 iterations; slowest at k = {worst}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_acceptance(criterion, capsys):
    assert criterion(capsys)


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
