"""Ship gate: one test per release criterion, each printing a PASS line.

Runtime caps are asserted with generous headroom against wall-clock
noise on shared machines, but never loosened beyond the stated budget.
"""

import json
import subprocess
import sys
import time

import numpy as np

from cgmatch import (
    CrossToken,
    ProjectionPair,
    SimilarityMatrix,
    SimulatedMatcher,
    bipartite_soft_match,
    clip_like_model,
    exhaustive_optimal,
    expectation_bipartite,
    expectation_cgsm,
    flops_estimate,
    greedy_match,
    halving_schedule,
    js_divergence_grad,
    js_divergence_loss,
    priority_mask,
    random_match,
    run_matching_benchmark,
    select_match_plan,
    serialize_embedding_file,
    simulate_optimal_match_rate,
    time_complete_graph_match,
)
from cgmatch.analysis import objective

from conftest import CASE1, CASE2, sim_from_upper

LN2 = float(np.log(2.0))


def test_criterion_1_worked_case_optimality():
    started = time.perf_counter()
    case1 = sim_from_upper(4, CASE1)
    case2 = sim_from_upper(4, CASE2)

    cg1 = objective(case1, select_match_plan(priority_mask(case1), 2))
    cg2 = objective(case2, select_match_plan(priority_mask(case2), 2))
    assert abs(cg1 - 1.1) < 1e-12
    assert abs(cg2 - 1.7) < 1e-12

    bp1 = objective(case1, bipartite_soft_match(case1, 2))
    bp2 = objective(case2, bipartite_soft_match(case2, 2))
    assert abs(bp1 - 1.1) < 1e-12
    assert abs(bp2 - 1.3) < 1e-12

    _, best1 = exhaustive_optimal(case1, 2)
    _, best2 = exhaustive_optimal(case2, 2)
    assert abs(best1 - 1.1) < 1e-12
    assert abs(best2 - 1.7) < 1e-12

    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    print(f"ACCEPTANCE 1: PASS - worked cases 1.1/1.7 (cgsm), 1.1/1.3 (bipartite), "
          f"oracle agrees, {elapsed:.3f}s")


def test_criterion_2_expectation_formulas():
    started = time.perf_counter()
    headline = expectation_cgsm(197, 12, 16)
    assert 0.7828 <= headline <= 0.7838
    assert expectation_bipartite(197, 12, 16) == 0.5

    # full grid; r is feasible when both matchers can schedule it, i.e.
    # every layer keeps a full opposite half: r <= N // (L + 1)
    checked = 0
    boundary = 0
    for N in range(10, 401):
        for L in range(1, 25):
            r_max = N // (L + 1)
            for r in range(1, r_max + 1):
                diff = expectation_cgsm(N, L, r) - expectation_bipartite(N, L, r)
                if L == 1 and N == 2 * r:
                    # exact halving in a single layer: both models leave
                    # N/2 of the N-1 candidates, the gap is exactly zero
                    assert diff == 0.0
                    boundary += 1
                else:
                    assert diff > 0.0, (N, L, r, diff)
                checked += 1
    assert checked > 100_000

    elapsed = time.perf_counter() - started
    assert elapsed < 10.0
    print(f"ACCEPTANCE 2: PASS - headline 0.7833/0.5000, dominance on {checked} grid "
          f"points ({boundary} exact-halving equalities), {elapsed:.1f}s")


def test_criterion_3_monte_carlo_agreement():
    started = time.perf_counter()
    trials = 1_000_000
    for matcher, closed in (
        (SimulatedMatcher.COMPLETE_GRAPH, expectation_cgsm(197, 12, 16)),
        (SimulatedMatcher.BIPARTITE, expectation_bipartite(197, 12, 16)),
    ):
        rate = simulate_optimal_match_rate(197, 12, 16, trials=trials, seed=0, method=matcher)
        assert abs(rate - closed) < 0.002, (matcher, rate, closed)

    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    print(f"ACCEPTANCE 3: PASS - 1e6-trial Monte Carlo within 0.002 of both closed "
          f"forms, {elapsed:.1f}s")


def test_criterion_4_oracle_dominance_and_disjointness():
    started = time.perf_counter()
    rng = np.random.default_rng(2024)
    cg_total = 0.0
    bp_total = 0.0
    instances = 1000
    for _ in range(instances):
        n = int(rng.integers(4, 11))
        r = int(rng.integers(1, min(3, n // 2) + 1))
        m = rng.uniform(-1, 1, size=(n, n))
        m = (m + m.T) / 2
        np.fill_diagonal(m, 1.0)
        sim = SimilarityMatrix(m)

        _, best = exhaustive_optimal(sim, r)
        plans = {
            "cgsm": select_match_plan(priority_mask(sim), r),
            "bipartite": bipartite_soft_match(sim, r),
            "greedy": greedy_match(sim, r),
            "random": random_match(n, r, seed=int(rng.integers(0, 2**31))),
        }
        for name, plan in plans.items():
            sources = {s for s, _ in plan.pairs}
            dests = {d for _, d in plan.pairs}
            assert len(plan.pairs) == r, name
            assert len(sources) == r, name
            assert not sources & dests, name
            assert objective(sim, plan) <= best + 1e-9, name
        cg_total += objective(sim, plans["cgsm"])
        bp_total += objective(sim, plans["bipartite"])

    assert cg_total / instances >= bp_total / instances

    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    print(f"ACCEPTANCE 4: PASS - {instances} instances, oracle never beaten, plans "
          f"disjoint, mean cgsm {cg_total/instances:.4f} >= bipartite "
          f"{bp_total/instances:.4f}, {elapsed:.1f}s")


def test_criterion_5_schedule_arithmetic():
    sched = halving_schedule(100, 12)
    assert sched.r_per_layer == (8,) * 12
    assert sched.final_tokens == 4

    sched = halving_schedule(197, 12)
    assert sched.r_per_layer == (16,) * 12
    assert sched.final_tokens == 5
    print("ACCEPTANCE 5: PASS - halving(100,12) -> r=8, 4 left; halving(197,12) -> "
          "r=16, 5 left")


def test_criterion_6_flops_calibration():
    report = flops_estimate(clip_like_model())
    baseline = report.baseline_total / 1e9
    reduced = report.total / 1e9
    assert abs(baseline - 20.6) / 20.6 < 0.10, baseline
    assert abs(reduced - 12.0) / 12.0 < 0.15, reduced
    assert report.reduction_fraction >= 0.35
    print(f"ACCEPTANCE 6: PASS - baseline {baseline:.3f} GF (target 20.6 +-10%), "
          f"reduced {reduced:.3f} GF (target 12.0 +-15%), fraction "
          f"{report.reduction_fraction:.3f} >= 0.35")


def test_criterion_7_js_loss_properties():
    pp = ProjectionPair(
        w_vision=np.array([[0.8, 0.1, -0.3], [0.2, 1.0, 0.5]]),
        w_language=np.array([[1.1, -0.2, 0.0], [0.3, 0.7, 0.9]]),
    )
    rng = np.random.default_rng(7)

    # zero on identical inputs
    same = rng.normal(size=4)
    eye = ProjectionPair(w_vision=np.eye(4), w_language=np.eye(4))
    assert js_divergence_loss(CrossToken(same), CrossToken(same), eye) < 1e-12

    worst_sym = 0.0
    worst_grad = 0.0
    for _ in range(50):
        v = rng.normal(size=2)
        l = rng.normal(size=2)
        fwd = js_divergence_loss(CrossToken(v), CrossToken(l), pp)
        swapped = ProjectionPair(w_vision=pp.w_language, w_language=pp.w_vision)
        rev = js_divergence_loss(CrossToken(l), CrossToken(v), swapped)
        worst_sym = max(worst_sym, abs(fwd - rev))
        assert 0.0 <= fwd <= LN2 + 1e-9

        gv, gl = js_divergence_grad(CrossToken(v), CrossToken(l), pp)
        step = 1e-5
        for vec, grad, side in ((v, gv, 0), (l, gl, 1)):
            for k in range(vec.size):
                hi, lo = vec.copy(), vec.copy()
                hi[k] += step
                lo[k] -= step
                if side == 0:
                    fp = js_divergence_loss(CrossToken(hi), CrossToken(l), pp)
                    fm = js_divergence_loss(CrossToken(lo), CrossToken(l), pp)
                else:
                    fp = js_divergence_loss(CrossToken(v), CrossToken(hi), pp)
                    fm = js_divergence_loss(CrossToken(v), CrossToken(lo), pp)
                numeric = (fp - fm) / (2 * step)
                rel = abs(numeric - grad[k]) / max(abs(numeric), abs(grad[k]), 1e-8)
                worst_grad = max(worst_grad, rel)

    assert worst_sym < 1e-12
    assert worst_grad < 1e-3
    print(f"ACCEPTANCE 7: PASS - JS zero/symmetric/bounded, gradient check worst "
          f"relative error {worst_grad:.2e} < 1e-3")


def test_criterion_8_complexity_behavior():
    report = run_matching_benchmark(sizes=(64, 128, 256, 512, 1024), dim=64, repeats=3)
    assert report.log_log_slope <= 2.3, report.log_log_slope

    entry = time_complete_graph_match(197, dim=64, repeats=5)
    assert entry.median_us < 5000, entry.median_us
    print(f"ACCEPTANCE 8: PASS - log-log slope {report.log_log_slope:.2f} <= 2.3, "
          f"N=197 median {entry.median_us} us < 5 ms")


def test_criterion_9_cli_determinism(tmp_path):
    case2 = tmp_path / "case2.cget"
    case2.write_bytes(serialize_embedding_file(sim_from_upper(4, CASE2)))
    config = tmp_path / "model.json"
    config.write_text(
        json.dumps(
            {
                "branches": [
                    {"name": "vision", "layers": 12, "width": 768, "tokens": 197, "reduced": True},
                    {"name": "text", "layers": 12, "width": 512, "tokens": 77},
                ]
            }
        )
    )
    commands = [
        ["match", "--input", str(case2), "--method", "cgsm", "--r", "2", "--seed", "3"],
        ["expect", "--n", "197", "--layers", "12", "--r", "16"],
        ["simulate", "--n", "30", "--layers", "2", "--r", "3", "--trials", "2000",
         "--seed", "1", "--method", "bipartite"],
        ["schedule", "--n0", "100", "--layers", "12"],
        ["flops", "--config", str(config)],
    ]
    for argv in commands:
        runs = [
            subprocess.run(
                [sys.executable, "-m", "cgmatch.cli", *argv],
                capture_output=True,
                timeout=120,
            )
            for _ in range(2)
        ]
        for proc in runs:
            assert proc.returncode == 0, (argv, proc.stderr)
        assert runs[0].stdout == runs[1].stdout, argv
    print("ACCEPTANCE 9: PASS - match/expect/simulate/schedule/flops stdout "
          "byte-identical across repeated invocations")
