"""Acceptance criteria, each at its stated tolerance and time limit.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
prints one PASS/FAIL line per criterion.
"""
import itertools
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from helpers import random_problem
from ume import (
    GainEngine,
    InvalidInstanceError,
    NodeProblem,
    brute_force_solve,
    build_mip,
    check_mip_solution,
    edge_problem_to_node_problem,
    evader_objective,
    greedy_solve,
    node_objective,
    node_problem_to_edge_problem,
    objective,
    path_objective_oracle,
    verify_bound,
)
from ume import bench

pytestmark = pytest.mark.acceptance

PROTOCOL = bench.ProtocolConfig()
PROTOCOL_SEEDS = range(50)


def detail(record_property, text):
    record_property("detail", text)


@pytest.fixture(scope="session")
def protocol_runs():
    """Both greedy variants on the 50 protocol instances (n=100, theta=30, B=10)."""
    start = time.perf_counter()
    results = bench.run_suite(PROTOCOL_SEEDS, PROTOCOL)
    return results, time.perf_counter() - start


def by_solver(results, name):
    return [(r, s) for r, s in results if r.solver == name]


# --- 1 -----------------------------------------------------------------------

@pytest.mark.criterion(1, "oracle equivalence")
def test_oracle_equivalence(record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst, done, skipped = 0.0, 0, 0
    while done < 200:
        p = random_problem(rng, int(rng.integers(3, 13)), n_evaders=int(rng.integers(1, 4)),
                           leak=float(rng.choice([0.0, 0.3])), density=float(rng.uniform(0.2, 0.5)))
        S = [int(e) for e in np.flatnonzero(rng.random(p.graph.n_edges) < 0.4)]
        try:
            oracle = [path_objective_oracle(ev, S, p.graph, max_paths=200) for ev in p.evaders]
        except InvalidInstanceError:
            skipped += 1  # more than 200 paths: outside the criterion's instance class
            continue
        for ev, o in zip(p.evaders, oracle):
            worst = max(worst, abs(evader_objective(ev, S, p.graph) - o))
        done += 1
    elapsed = time.perf_counter() - start
    detail(record_property, f"200 instances, max |diff| = {worst:.1e} (tol 1e-10), {elapsed:.1f} s")
    assert worst <= 1e-10
    assert elapsed < 10


# --- 2 -----------------------------------------------------------------------

@pytest.mark.criterion(2, "submodularity")
def test_submodularity(record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(2002)
    violations, worst = 0, -math.inf
    for k in range(200):
        p = random_problem(rng, int(rng.integers(4, 16)), acyclic=bool(k % 2),
                           n_evaders=int(rng.integers(1, 4)), leak=float(rng.choice([0.0, 0.3])))
        engine = GainEngine(p)
        E = p.graph.n_edges
        for _ in range(50):
            x = int(rng.integers(E))
            rest = [e for e in range(E) if e != x]
            S2 = [e for e in rest if rng.random() < rng.random()]
            S1 = [e for e in S2 if rng.random() < 0.5]
            d1 = engine.objective(S1 + [x]) - engine.objective(S1)
            d2 = engine.objective(S2 + [x]) - engine.objective(S2)
            worst = max(worst, d2 - d1)
            violations += d1 < d2 - 1e-9
    elapsed = time.perf_counter() - start
    detail(record_property, f"10000 triples, {violations} violations, "
                            f"max D(S2,x)-D(S1,x) = {worst:.1e}, {elapsed:.1f} s")
    assert violations == 0
    assert elapsed < 60


# --- 3 -----------------------------------------------------------------------

@pytest.mark.criterion(3, "greedy within (1-1/e) of optimum")
def test_greedy_quality(record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(3003)
    ratios, failures, done = [], 0, 0
    while done < 100:
        B = int(rng.integers(1, 4))
        # single-node sources on dense graphs give greedy an occasional wrong first step
        p = random_problem(rng, int(rng.integers(6, 10)), budget=B, acyclic=bool(done % 3),
                           density=0.5, n_evaders=int(rng.integers(1, 5)), source_mass=1)
        if p.graph.n_edges > 20 or p.graph.n_edges < B:
            continue
        report = verify_bound(greedy_solve(p), brute_force_solve(p))
        ratios.append(report.ratio)
        failures += not report.passed
        done += 1
    elapsed = time.perf_counter() - start
    below = sum(r < 1 - 1e-12 for r in ratios)
    detail(record_property, f"100 instances, min ratio {min(ratios):.4f} "
                            f"(bound {1 - 1 / math.e:.4f}), greedy suboptimal on {below}, "
                            f"{failures} failures, {elapsed:.1f} s")
    assert failures == 0
    assert elapsed < 300


# --- 4 -----------------------------------------------------------------------

@pytest.mark.criterion(4, "priority greedy = basic greedy on GTG")
def test_algorithm_equivalence(protocol_runs, record_property):
    results, _ = protocol_runs
    basic = dict((r.instance_id, s) for r, s in by_solver(results, "greedy"))
    prio = dict((r.instance_id, s) for r, s in by_solver(results, "priority"))
    assert len(basic) == len(prio) == 50
    mismatches = [i for i in basic if basic[i] is None or prio[i] is None
                  or basic[i].selected != prio[i].selected or basic[i].objective != prio[i].objective]
    detail(record_property, f"50 instances, {len(mismatches)} mismatches")
    assert not mismatches


# --- 5 -----------------------------------------------------------------------

@pytest.mark.criterion(5, "evaluation counts on the GTG protocol")
def test_evaluation_counts(protocol_runs, record_property):
    results, elapsed = protocol_runs
    basic = by_solver(results, "greedy")
    prio = by_solver(results, "priority")
    B = PROTOCOL.budget
    closed = [r.eval_count == r.n_evaders * (B * r.n_edges - B * (B - 1) // 2) for r, _ in basic]
    mean_basic = np.mean([r.eval_count for r, _ in basic])
    mean_prio = np.mean([r.eval_count for r, _ in prio])
    mean_edges = np.mean([r.n_edges for r, _ in basic])
    speedup = mean_basic / mean_prio
    detail(record_property, f"closed form {sum(closed)}/50, basic {mean_basic:.1f} "
                            f"(B|E||K| = {B * mean_edges * 2:.1f}), priority {mean_prio:.1f} "
                            f"({100 * mean_prio / mean_basic:.3f}%), speedup {speedup:.1f}, "
                            f"suite {elapsed:.0f} s")
    assert all(closed)
    assert mean_prio <= 0.02 * mean_basic
    assert speedup >= 100
    assert elapsed < 600


# --- 6 -----------------------------------------------------------------------

@pytest.mark.criterion(6, "budget sweep scaling")
def test_budget_scaling(protocol_runs, record_property):
    results, _ = protocol_runs
    sweep = bench.budget_sweep(results, range(1, 11))
    b, p = sweep["greedy"]["loglog_slope"], sweep["priority"]["loglog_slope"]
    detail(record_property, f"log-log slope basic {b:.4f} (want [0.95, 1.0]), "
                            f"priority {p:.4f} (want [0.7, 1.3]); mean CV basic "
                            f"{sweep['greedy']['mean_cv']:.2f}, priority {sweep['priority']['mean_cv']:.2f}")
    assert 0.95 <= b <= 1.0
    assert 0.7 <= p <= 1.3


# --- 7 -----------------------------------------------------------------------

THETAS = (50, 45, 40, 35, 30, 25, 20)


@pytest.mark.criterion(7, "threshold sweep insensitivity")
def test_theta_insensitivity(record_property):
    results = []
    for theta in THETAS:
        cfg = replace(PROTOCOL, theta=float(theta))
        results += bench.run_suite(range(50), replace(cfg, solvers=("priority",)))
        results += bench.run_suite(range(10), replace(cfg, solvers=("greedy",)))
    sweep = bench.theta_sweep(results)
    prio, basic = sweep["priority"], sweep["greedy"]
    edges = [pt["mean_edges"] for pt in basic["points"]]
    detail(record_property, f"priority max/min {prio['max_min_ratio']:.2f} (want <= 2), "
                            f"basic evals-vs-edges slope {basic['edges_slope']:.3f}, "
                            f"mean |E| {min(edges):.0f}..{max(edges):.0f}")
    assert prio["max_min_ratio"] <= 2
    assert 0.95 <= basic["edges_slope"] <= 1.05
    assert max(edges) > 2 * min(edges)


# --- 8 -----------------------------------------------------------------------

@pytest.mark.criterion(8, "GTG edge count calibration")
def test_gtg_calibration(protocol_runs, record_property):
    results, _ = protocol_runs
    edges = [r.n_edges for r, _ in by_solver(results, "greedy")]
    mean = float(np.mean(edges))
    detail(record_property, f"mean {mean:.1f} directed edges over 50 seeds (want 1200..2000)")
    assert len(edges) == 50
    assert abs(mean - 1600) <= 0.25 * 1600


# --- 9 -----------------------------------------------------------------------

@pytest.mark.criterion(9, "edge/node reductions preserve the objective")
def test_transforms(record_property):
    rng = np.random.default_rng(9009)
    worst = 0.0
    for k in range(50):
        p = random_problem(rng, int(rng.integers(3, 12)), acyclic=bool(k % 2),
                           n_evaders=int(rng.integers(1, 4)), leak=float(rng.choice([0.0, 0.3])))
        node, tmap = edge_problem_to_node_problem(p)
        node_back = NodeProblem(p.graph, rng.uniform(0, 1, p.graph.n_nodes), p.evaders, 1)
        edge, tmap2 = node_problem_to_edge_problem(node_back)
        for _ in range(5):
            S = [int(e) for e in np.flatnonzero(rng.random(p.graph.n_edges) < 0.4)]
            worst = max(worst, abs(objective(p, S) - node_objective(node, tmap.translate(S))))
            Y = [int(v) for v in np.flatnonzero(rng.random(p.graph.n_nodes) < 0.4)]
            worst = max(worst, abs(node_objective(node_back, Y) - objective(edge, tmap2.translate(Y))))
    detail(record_property, f"50 instances x 5 sets x 2 directions, max |diff| = {worst:.1e}")
    assert worst <= 1e-10


# --- 10 ----------------------------------------------------------------------

@pytest.mark.criterion(10, "MIP consistency")
def test_mip_consistency(record_property):
    # The dominance argument needs pi <= 1, i.e. non-retreating chains; on chains
    # with revisits the linearisation is not exact (see test_mip.py).
    rng = np.random.default_rng(10010)
    done, checked, failures, worst, not_min = 0, 0, 0, 0.0, 0
    while done < 50:
        p = random_problem(rng, int(rng.integers(3, 8)),
                           budget=int(rng.integers(1, 4)), n_evaders=int(rng.integers(1, 3)),
                           leak=float(rng.choice([0.0, 0.3])))
        E = p.graph.n_edges
        if E > 12:
            continue
        build_mip(p)
        best = brute_force_solve(p)
        H = {}
        for S in itertools.combinations(range(E), p.budget):
            r = np.zeros(E)
            r[list(S)] = 1
            rep = check_mip_solution(p, r)
            checked += 1
            failures += not rep.passed
            worst = max(worst, rep.max_violation, abs(rep.H - (1 - rep.J)))
            H[S] = rep.H
        not_min += H[best.selected] > min(H.values()) + 1e-12
        done += 1
    detail(record_property, f"50 instances, {checked} feasible r, {failures} failures, "
                            f"max violation {worst:.1e}, optimum not minimal H on {not_min}")
    assert failures == 0 and worst <= 1e-8 and not_min == 0
