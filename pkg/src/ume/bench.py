"""Evaluation-count benchmarks on generated GTG instances.

One run solves an instance with both greedy variants at the maximal budget.
Neither algorithm looks at the budget except to stop, so the first ``b``
steps of a budget-``B`` run are exactly the budget-``b`` run; the budget
sweep reads cumulative evaluation counts per step from a single run.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from statistics import fmean, pstdev

import numpy as np

from .benchgen import GTG_WEIGHT_SCALE, GtgConfig, gtg_generate, make_instance
from .model import InvalidInstanceError, NumericalError, ProblemInstance
from .solvers import Solution, greedy_solve, priority_greedy_solve

__all__ = ["ProtocolConfig", "BenchmarkRecord", "protocol_instance", "run_instance", "run_suite",
           "budget_sweep", "theta_sweep", "loglog_slope", "write_records", "read_records"]


@dataclass(frozen=True)
class ProtocolConfig:
    n: int = 100
    theta: float = 30.0
    alpha: float = 2.0
    weight_scale: float = GTG_WEIGHT_SCALE
    budget: int = 10
    lambdas: tuple = (0.1, 1000.0)
    d: float = 0.5
    solvers: tuple = ("greedy", "priority")


@dataclass
class BenchmarkRecord:
    instance_id: str
    solver: str
    budget: int
    n_nodes: int
    n_edges: int
    n_evaders: int
    objective: float
    eval_count: int
    wall_time: float
    seed: int
    theta: float = math.nan
    step_evals: str = ""
    status: str = "ok"


FIELDS = [f.name for f in fields(BenchmarkRecord)]

_SOLVE = {"greedy": greedy_solve, "priority": priority_greedy_solve}


def protocol_instance(seed: int, cfg: ProtocolConfig = ProtocolConfig()) -> tuple[str, ProblemInstance]:
    graph = gtg_generate(GtgConfig(n=cfg.n, theta=cfg.theta, alpha=cfg.alpha,
                                   weight_scale=cfg.weight_scale, seed=seed))
    problem = make_instance(graph, len(cfg.lambdas), cfg.lambdas, cfg.d, cfg.budget, seed)
    return f"gtg-n{cfg.n}-th{cfg.theta:g}-s{seed}", problem


def run_instance(seed: int, cfg: ProtocolConfig = ProtocolConfig()):
    """Solve one generated instance with every configured solver.

    Returns ``[(record, solution_or_None)]``; failures become records with a
    non-ok status instead of exceptions.
    """
    try:
        iid, problem = protocol_instance(seed, cfg)
    except (InvalidInstanceError, NumericalError) as exc:
        iid = f"gtg-n{cfg.n}-th{cfg.theta:g}-s{seed}"
        return [(BenchmarkRecord(iid, s, cfg.budget, cfg.n, 0, len(cfg.lambdas), math.nan, 0, 0.0,
                                 seed, cfg.theta, "", f"error: {exc}"), None) for s in cfg.solvers]
    out = []
    for name in cfg.solvers:
        rec = BenchmarkRecord(iid, name, cfg.budget, problem.graph.n_nodes, problem.graph.n_edges,
                              problem.n_evaders, math.nan, 0, 0.0, seed, cfg.theta)
        try:
            sol = _SOLVE[name](problem)
        except (InvalidInstanceError, NumericalError) as exc:
            rec.status = f"error: {exc}"
            out.append((rec, None))
            continue
        rec.objective = sol.objective
        rec.eval_count = sol.eval_count
        rec.wall_time = sol.wall_time
        rec.step_evals = " ".join(str(x) for x in sol.step_evals)
        out.append((rec, sol))
    return out


def _run_one(job):
    seed, cfg = job
    return run_instance(seed, cfg)


def run_suite(seeds, cfg: ProtocolConfig = ProtocolConfig(), workers: int = 1):
    """Run :func:`run_instance` over ``seeds``; results are ordered by seed."""
    jobs = [(int(s), cfg) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_run_one, jobs))
    else:
        chunks = [_run_one(j) for j in jobs]
    return [item for chunk in chunks for item in chunk]


def _summary(values):
    values = [float(v) for v in values]
    mean = fmean(values)
    sd = pstdev(values) if len(values) > 1 else 0.0
    return {"mean": mean, "std": sd, "cv": sd / mean if mean else math.nan, "count": len(values)}


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    slope, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope)


def budget_sweep(results, budgets=range(1, 11)) -> dict:
    """Mean and coefficient of variation of evaluation counts per budget."""
    out = {}
    for solver in sorted({rec.solver for rec, sol in results if sol is not None}):
        sols = [sol for rec, sol in results if sol is not None and rec.solver == solver]
        rows = []
        for b in budgets:
            counts = [s.step_evals[b - 1] for s in sols if len(s.step_evals) >= b]
            rows.append({"budget": b, **_summary(counts)})
        slope = loglog_slope([r["budget"] for r in rows], [r["mean"] for r in rows])
        out[solver] = {"points": rows, "loglog_slope": slope,
                       "mean_cv": fmean(r["cv"] for r in rows)}
    return out


def theta_sweep(results) -> dict:
    """Per threshold: mean edge count and evaluation-count statistics."""
    out = {}
    for solver in sorted({rec.solver for rec, _ in results}):
        rows = []
        for theta in sorted({rec.theta for rec, _ in results}, reverse=True):
            recs = [r for r, s in results if s is not None and r.solver == solver and r.theta == theta]
            if not recs:
                continue
            rows.append({"theta": theta,
                         "mean_edges": fmean(r.n_edges for r in recs),
                         "evals_per_edge": fmean(r.eval_count / r.n_edges for r in recs),
                         **_summary([r.eval_count for r in recs])})
        means = [r["mean"] for r in rows]
        out[solver] = {"points": rows,
                       "max_min_ratio": max(means) / min(means) if means else math.nan,
                       "edges_slope": loglog_slope([r["mean_edges"] for r in rows], means)
                       if len(rows) > 1 else math.nan}
    return out


def write_records(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=FIELDS)
        w.writeheader()
        for rec in records:
            row = asdict(rec)
            row["objective"] = repr(float(rec.objective))
            w.writerow(row)


def read_records(path) -> list[BenchmarkRecord]:
    types = {f.name: f.type for f in fields(BenchmarkRecord)}
    casts = {"int": int, "float": float, "str": str}
    with open(path, newline="") as fh:
        return [BenchmarkRecord(**{k: casts[types[k]](v) for k, v in row.items()})
                for row in csv.DictReader(fh)]
