"""Acceptance criteria, one test each, at the stated tolerances.

Each test prints a single ``PASS``/``FAIL`` line with the measured values and
the wall-clock time against its budget.
"""

import math
import time

import numpy as np
import pytest
import scipy.linalg

from snnwall.harness import scenarios as sc
from snnwall.lqr import LinearModel, LqrWeights, solve_dare
from snnwall.spline import (basis, curvature, eval_derivatives, evaluate,
                            fit_wall, make_knots)

from oracles import dare_doubling
from test_lqr import random_stabilizable_system
from test_snn import analytic_rate, measured_rate, static_task, window_mse


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed=None, budget=None):
        timing = ""
        if budget is not None:
            ok = ok and elapsed < budget
            timing = f" [{elapsed:.1f} s / {budget:.0f} s]"
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}{timing}")
        return ok
    return emit


def test_criterion_1_spline_properties(report):
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    degree, n = 3, 10
    ctrl = rng.normal(size=(n, 2))
    curve = fit_wall(ctrl, degree)
    knots = make_knots(n, degree)
    pou = max(abs(sum(basis(i, degree, t, knots) for i in range(n)) - 1.0)
              for t in rng.uniform(0, 1, 1000))
    ends = np.array_equal(evaluate(curve, 0.0), ctrl[0]) and np.array_equal(evaluate(curve, 1.0), ctrl[-1])
    h, fd = 1e-5, 0.0
    for t in np.linspace(0.05, 0.95, 31) + 0.003:
        d1, d2 = eval_derivatives(curve, t)
        fd1 = (evaluate(curve, t + h) - evaluate(curve, t - h)) / (2 * h)
        fd2 = (eval_derivatives(curve, t + h)[0] - eval_derivatives(curve, t - h)[0]) / (2 * h)
        fd = max(fd, np.max(np.abs(d1 - fd1)), np.max(np.abs(d2 - fd2)))
    radius = 1.5
    ang = np.radians(np.linspace(0, 90, 8))
    arc = fit_wall(radius * np.column_stack([np.cos(ang), np.sin(ang)]), 3)
    kappa = curvature(*eval_derivatives(arc, 0.5))
    rel = abs(kappa * radius - 1.0)
    elapsed = time.perf_counter() - start
    ok = pou <= 1e-12 and ends and fd <= 1e-5 and rel <= 0.02
    assert report(1, "spline", ok,
                  f"unity err {pou:.1e}, endpoints exact {ends}, derivative err {fd:.1e}, "
                  f"curvature err {100 * rel:.2f}%", elapsed, 5)


def test_criterion_2_riccati_oracles(report):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_doubling = worst_schur = 0.0
    for _ in range(50):
        A, B, Q, R = random_stabilizable_system(rng)
        P = solve_dare(LinearModel(A, B, 1.0), LqrWeights(Q, R)).P_ss
        ref = dare_doubling(A, B, Q, R)
        schur = scipy.linalg.solve_discrete_are(A, B, Q, R)
        worst_doubling = max(worst_doubling, np.max(np.abs(P - ref)) / np.max(np.abs(ref)))
        worst_schur = max(worst_schur, np.max(np.abs(P - schur)) / np.max(np.abs(schur)))
    one = LinearModel(np.eye(1), np.eye(1), 1.0)
    golden = abs(solve_dare(one, LqrWeights(np.eye(1), np.eye(1))).P_ss[0, 0] - (1 + math.sqrt(5)) / 2)
    elapsed = time.perf_counter() - start
    ok = worst_doubling <= 1e-6 and worst_schur <= 1e-6 and golden <= 1e-9
    assert report(2, "Riccati", ok,
                  f"50 systems rel err {worst_doubling:.1e} (doubling) / {worst_schur:.1e} "
                  f"(Schur), golden ratio err {golden:.1e}", elapsed, 10)


def test_criterion_3_lif_rate(report):
    start = time.perf_counter()
    worst = 0.0
    for drive in np.linspace(1.1, 6.0, 10):
        rate, _ = measured_rate(drive, dt=1e-4)
        worst = max(worst, abs(rate / analytic_rate(drive) - 1))
    elapsed = time.perf_counter() - start
    assert report(3, "LIF rate", worst <= 0.02,
                  f"worst relative rate error {100 * worst:.2f}% over 10 currents", elapsed, 10)


def test_criterion_4_pes_descent(report):
    start = time.perf_counter()
    errors = static_task()
    mse = window_mse(errors)
    monotone = bool(np.all(np.diff(mse[1:]) <= 0.0))
    final = abs(errors[-1])
    elapsed = time.perf_counter() - start
    assert report(4, "PES descent", final < 0.05 and monotone,
                  f"final |error| {final:.4f}, windowed error non-increasing {monotone}",
                  elapsed, 10)


def test_criterion_5_case_a(report):
    start = time.perf_counter()
    res = sc.run_scenario(sc.default_config("a"))
    snn_m, lqr_m = res["snn"].metrics, res["lqr"].metrics
    log = res["snn"].log
    t, u_aw = log["t"], log["u_a_omega"]
    tail = u_aw[t >= 15.0]
    settled = float(np.mean(tail))
    drift = abs(np.mean(u_aw[t >= 17.5]) - np.mean(u_aw[(t >= 15.0) & (t < 17.5)]))
    elapsed = time.perf_counter() - start
    ok = (snn_m.converged and snn_m.convergence_time <= 20.0 and not lqr_m.converged
          and abs(settled + 0.07) <= 0.04 and settled < 0 and drift < 0.01)
    lqr_t = f"{lqr_m.convergence_time:.2f} s" if lqr_m.converged else "not converged"
    assert report(5, "case A", ok,
                  f"SNN converged at {snn_m.convergence_time:.2f} s, LQR {lqr_t}, "
                  f"u_a omega over [15,20] s {settled:.4f} rad/s (drift {drift:.4f})",
                  elapsed, 30)


def test_criterion_6_case_b(report):
    start = time.perf_counter()
    means, means_th, std_snn, std_lqr = [], [], [], []
    for seed in range(5):
        res = sc.run_scenario(sc.with_seed(sc.default_config("b"), seed))
        for name, store in (("snn", std_snn), ("lqr", std_lqr)):
            log = res[name].log
            t, e_p = log["t"], log["cross_track"]
            store.append(float(np.std(e_p[t >= 15.0])))
            if name == "snn":
                means.append(float(np.mean(e_p[t >= 10.0])))
                means_th.append(float(np.mean(np.abs(log["heading_error"][t >= 10.0]))))
    elapsed = time.perf_counter() - start
    mean_p, mean_th = np.mean(means), np.mean(means_th)
    s_snn, s_lqr = np.mean(std_snn), np.mean(std_lqr)
    ok = mean_p <= 0.15 and mean_th <= 0.3 and s_snn < s_lqr
    assert report(6, "case B", ok,
                  f"SNN mean e_p over [10,35] s {mean_p:.4f} m (seeds "
                  f"{', '.join(f'{m:.3f}' for m in means)}), mean |e_theta| {mean_th:.3f} rad, "
                  f"std e_p over [15,35] s SNN {s_snn:.4f} vs LQR {s_lqr:.4f}", elapsed, 60)


def test_criterion_7_case_c(report):
    start = time.perf_counter()
    mae = {"snn": [], "lqr": []}
    collided = False
    for seed in range(3):
        res = sc.run_scenario(sc.with_seed(sc.default_config("c"), seed))
        for name in mae:
            mae[name].append(res[name].metrics.mae)
            collided |= res[name].metrics.collided
    elapsed = time.perf_counter() - start
    snn_mean, lqr_mean = np.mean(mae["snn"]), np.mean(mae["lqr"])
    ratio = snn_mean / lqr_mean
    per_seed = ", ".join(f"{s / l:.2f}" for s, l in zip(mae["snn"], mae["lqr"]))
    ok = ratio <= 0.75 and not collided
    assert report(7, "case C", ok,
                  f"MAE SNN {snn_mean:.4f} m vs LQR {lqr_mean:.4f} m, ratio {ratio:.2f} "
                  f"(per seed {per_seed}), collision-free {not collided}", elapsed, 120)


def _csv_bytes(results, tmp_path, tag):
    out = {}
    for name, r in results.items():
        path = tmp_path / f"{tag}_{name}.csv"
        r.log.write_csv(path)
        out[name] = path.read_bytes()
    return out


def test_criterion_8_determinism(report, tmp_path):
    start = time.perf_counter()
    configs = {"a": sc.default_config("a"), "b": sc.default_config("b"), "c": sc.default_config("c")}
    configs["c"].duration = 20.0
    same = {}
    for key, cfg in configs.items():
        first = _csv_bytes(sc.run_scenario(cfg), tmp_path, f"{key}1")
        second = _csv_bytes(sc.run_scenario(cfg), tmp_path, f"{key}2")
        same[key] = first == second
    elapsed = time.perf_counter() - start
    assert report(8, "determinism", all(same.values()),
                  "byte-identical log CSVs " + ", ".join(f"case {k}: {v}" for k, v in same.items()),
                  elapsed)


def test_criterion_9_zero_learning_rate(report, tmp_path):
    start = time.perf_counter()
    same = {}
    for key in ("a", "b"):
        cfg = sc.default_config(key)
        cfg.snn.gamma_v = cfg.snn.gamma_w = 0.0
        logs = _csv_bytes(sc.run_scenario(cfg), tmp_path, key)
        same[key] = logs["snn"] == logs["lqr"]
    elapsed = time.perf_counter() - start
    assert report(9, "benchmark equivalence", all(same.values()),
                  "gamma=0 SNN log identical to SNN-off log "
                  + ", ".join(f"case {k}: {v}" for k, v in same.items()), elapsed)
