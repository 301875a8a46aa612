"""Acceptance gate: one test per criterion, one PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v`` (several minutes on one
core); the summary lines are printed at the end of the session.  Run as a
script to get the same lines without pytest's progress output.
"""

import csv
import json
import os
import time

import numpy as np
import pytest

from cellfree_mp import kernels
from cellfree_mp.baselines import apg_smoothed_solve
from cellfree_mp.channel import NetworkConfig, generate_channel
from cellfree_mp.experiments import Scenario, run_cdf, run_convergence
from cellfree_mp.oracle import bisection_maxmin
from cellfree_mp.problem import f_values, grad_f, reduce, sinr, update_filters
from cellfree_mp.saddle import MpConfig, mp_solve, project_simplex

from conftest import channel_reduced

pytestmark = pytest.mark.acceptance

RESULTS = []
_DELTAS = []
WORKERS = max(1, os.cpu_count() or 1)


def report(num, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:>2}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def _mp(rp, cfg, **kw):
    rep = mp_solve(rp, cfg=cfg, **kw)
    _DELTAS.append(float(rep.deltas.max()) if rep.deltas.size else -np.inf)
    return rep


def test_c01_optimality_small_instances():
    rng = np.random.default_rng(2024)
    cfg = MpConfig(tol=0.0, max_iter=100_000)
    t0 = time.perf_counter()
    errs = []
    for _ in range(100):
        L = int(rng.integers(2, 5))
        M = int(rng.integers(1, 9))
        rp, _, _ = channel_reduced(M, L, int(rng.integers(1 << 30)))
        rep = _mp(rp, cfg)
        t, p = bisection_maxmin(rp, eps=1e-6)
        ref = f_values(np.log(rp.omega * p), rp).max()
        errs.append(abs(rep.objective - ref) / ref)
    secs = time.perf_counter() - t0
    worst = max(errs)
    ok = worst <= 1e-3 and secs < 60
    report(1, ok, f"max rel error {worst:.2e} (<= 1e-3), {sum(e > 1e-3 for e in errs)}/100 over, "
                  f"{secs:.1f}s (< 60s)")
    assert ok


def _read_convergence(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_c02_desk_scale_convergence(tmp_path):
    scen = Scenario(name="c02", network=NetworkConfig(num_aps=150, num_users=50, area_side=1.0, rng_seed=1),
                    num_realizations=100, solvers=("mp", "gda", "apg"), omega=("M",), max_iter=500,
                    output_dir=str(tmp_path))
    path = run_convergence(scen, workers=WORKERS)
    rows = [r for r in _read_convergence(path) if int(r["iteration"]) == 500]
    final = {r["solver"]: float(r["mean_min_rate"]) for r in rows}
    oracle = json.loads((tmp_path / "run.json").read_text())["oracle_mean_min_rate"]
    gap = oracle - final["mp"]
    close = abs(gap) <= 1e-3
    order = final["mp"] > final["gda"] and final["mp"] > final["apg"]
    report(2, close and order,
           f"oracle {oracle:.4f}, mp {final['mp']:.4f} (gap {gap:.2e}, need <= 1e-3: "
           f"{'ok' if close else 'no'}), gda {final['gda']:.4f}, apg {final['apg']:.4f} "
           f"(mp strictly best: {'ok' if order else 'no'})")
    assert order
    assert close


def test_c03_omega_scaling():
    cfg = MpConfig()
    wins = 0
    pairs = []
    for seed in range(50):
        cfg_net = NetworkConfig(num_aps=150, num_users=50, rng_seed=10_000 + seed)
        stats = generate_channel(cfg_net)
        p_max = cfg_net.max_power_norm
        q = update_filters(np.full(50, p_max), stats)
        n_m = _mp(reduce(stats, q, 1, 150.0, p_max), cfg).iterations
        n_1 = _mp(reduce(stats, q, 1, 1.0, p_max), cfg).iterations
        wins += n_m <= n_1
        pairs.append((n_m, n_1))
    frac = wins / 50
    equal = sum(a == b for a, b in pairs)
    ok = frac >= 0.8
    report(3, ok, f"omega=M needs <= iterations of omega=1 on {frac:.0%} (>= 80%); "
                  f"{equal}/50 identical counts")
    assert ok


def test_c04_gradient_finite_differences():
    rng = np.random.default_rng(44)
    worst = 0.0
    h = 1e-6
    for k in range(100):
        M = int(rng.integers(1, 30))
        L = int(rng.integers(2, 12))
        rp, _, _ = channel_reduced(M, L, 500 + k, omega=float(rng.choice([1.0, M])))
        th = rp.theta_bar - rng.uniform(0.0, 6.0, L)
        J = grad_f(th, rp)
        fd = np.empty_like(J)
        for i in range(L):
            e = np.zeros(L)
            e[i] = h
            fd[:, i] = (f_values(th + e, rp) - f_values(th - e, rp)) / (2 * h)
        # the fused Lagrangian gradient must agree with the Jacobian
        lam = rng.dirichlet(np.ones(L))
        _, g = kernels.f_and_grad(th, lam, rp.C, rp.cbar)
        np.testing.assert_allclose(g, lam @ J, rtol=1e-9, atol=1e-12 * np.abs(J).max())
        worst = max(worst, np.abs(J - fd).max() / np.abs(J).max())
    ok = worst <= 1e-6
    report(4, ok, f"max relative l-inf error {worst:.2e} (<= 1e-6) over 100 pairs")
    assert ok


def test_c05_line_search_soundness():
    rng = np.random.default_rng(55)
    for backend in kernels.available_backends():
        for k in range(40):
            M = int(rng.integers(1, 80))
            L = int(rng.integers(1, 40))
            rp, _, _ = channel_reduced(M, L, 900 + k, omega=float(rng.choice([1.0, M, 10.0])),
                                       pilot_len=max(1, L // 2), pilot_assignment="reuse")
            rho = float(rng.choice([0.5, 0.9]))
            # same shrink range for both factors: 0.5**60 == 0.9**395
            cfg = MpConfig(mu0=float(rng.choice([0.1, 1.0, 10.0])), rho=rho,
                           max_backtracks=60 if rho == 0.5 else 395,
                           tol=0.0, max_iter=300 if backend == "cython" else 60)
            _mp(rp, cfg, backend=backend)
    worst = max(_DELTAS)
    ok = worst <= 0.0
    report(5, ok, f"max accepted delta {worst:.3e} (<= 0) over {len(_DELTAS)} runs")
    assert ok


def test_c06_projection_oracles():
    rng = np.random.default_rng(66)
    worst_gap = worst_sum = 0.0
    for k in range(10_000):
        n = int(rng.integers(1, 60))
        if k % 2:
            x = rng.choice(rng.normal(0, 2, 4), size=n)  # heavy ties
        else:
            x = rng.normal(0, rng.choice([0.01, 1.0, 100.0]), n)
        ref = project_simplex(x, "sort")
        for name in kernels.available_backends():
            y = kernels.get_backend(name).project_simplex(x)
            worst_gap = max(worst_gap, np.abs(y - ref).max())
            worst_sum = max(worst_sum, abs(y.sum() - 1.0))
    ok = worst_gap <= 1e-9 and worst_sum <= 1e-9
    report(6, ok, f"bisection vs sort l-inf {worst_gap:.1e}, |sum-1| {worst_sum:.1e} (both <= 1e-9), 1e4 vectors")
    assert ok


def test_c07_filter_optimality():
    rng = np.random.default_rng(77)
    worst = np.inf
    for k in range(20):
        M = int(rng.integers(2, 16))
        L = int(rng.integers(2, 8))
        cfg = NetworkConfig(num_aps=M, num_users=L, rng_seed=700 + k, pilot_len=max(1, L // 2),
                            pilot_assignment="reuse")
        stats = generate_channel(cfg)
        p = rng.uniform(0.0, 1.0, L) * cfg.max_power_norm
        best = sinr(p, update_filters(p, stats), stats)
        for _ in range(1000):
            u = rng.normal(size=(L, M))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            worst = min(worst, np.min(best - sinr(p, u, stats)))
    ok = worst >= -1e-12
    report(7, ok, f"min over users and samples of gamma(q*) - gamma(u) = {worst:.2e} (>= -1e-12)")
    assert ok


def test_c08_per_iteration_scaling():
    if "cython" not in kernels.available_backends():
        report(8, False, "compiled backend unavailable; scaling measured on it only")
        pytest.fail("compiled backend unavailable")
    per = {}
    cfg = MpConfig(tol=0.0, max_iter=1000)
    for L in (100, 200, 400):
        rp, _, _ = channel_reduced(40, L, 8)
        per[L] = min(_mp(rp, cfg, backend="cython").times[-1] for _ in range(5)) / cfg.max_iter
    r1, r2 = per[200] / per[100], per[400] / per[200]
    ok = 3 <= r1 <= 6 and 3 <= r2 <= 6
    report(8, ok, f"per-iteration us {per[100] * 1e6:.1f}/{per[200] * 1e6:.1f}/{per[400] * 1e6:.1f}, "
                  f"ratios {r1:.2f}, {r2:.2f} (in [3, 6], soft)")
    assert ok


def test_c09_ao_benefit(tmp_path):
    scen = Scenario(name="c09", network=NetworkConfig(num_aps=200, num_users=30, area_side=1.0, rng_seed=9),
                    num_realizations=50, solvers=("mp",), mode="both", output_dir=str(tmp_path))
    with open(run_cdf(scen, workers=WORKERS), encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    p10 = {m: np.percentile([float(r["rate"]) for r in rows if r["mode"] == m], 10)
           for m in ("ao", "power_only")}
    ok = p10["ao"] >= p10["power_only"]
    report(9, ok, f"10th percentile rate ao {p10['ao']:.3f} >= power_only {p10['power_only']:.3f}")
    assert ok


def test_c10_apg_smoothing_bound():
    rng = np.random.default_rng(1010)
    worst = -np.inf
    for k in range(50):
        rp, _, _ = channel_reduced(int(rng.integers(20, 60)), 10, 1000 + k)
        rep = apg_smoothed_solve(rp, cfg=MpConfig(tol=0.0, max_iter=8000))
        t, p = bisection_maxmin(rp, eps=1e-9)
        opt = f_values(np.log(rp.omega * p), rp).max()
        slack = rep.meta["smoothing"] * np.log(10) + 1e-4
        worst = max(worst, (rep.objective - opt) - slack)
    ok = worst <= 0.0
    report(10, ok, f"max (excess - (mu_s ln L + 1e-4)) = {worst:.2e} (<= 0) on 50 instances")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
