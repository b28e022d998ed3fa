"""Budgeted maximisation of the capture probability.

Every solver charges one evaluation per evader linear solve.  Gains are
compared with a small tie tolerance and ties go to the lowest edge id, so
the basic and the priority greedy pick identical sequences.
"""
from __future__ import annotations

import heapq
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .model import (
    DENSE_LIMIT,
    InvalidInstanceError,
    ProblemInstance,
    _clamp_probability,
    _dense_solve,
    _edge_ids,
    expected_visits,
    topological_order,
)

__all__ = [
    "TIE_TOL",
    "EvalCounter",
    "GainEngine",
    "GainEntry",
    "Solution",
    "BoundReport",
    "marginal_gain",
    "greedy_solve",
    "fast_init_gains",
    "priority_greedy_solve",
    "brute_force_solve",
    "verify_bound",
    "SOLVERS",
]

# Gains closer than this are treated as equal; the lower edge id wins.
TIE_TOL = 1e-12


class EvalCounter:
    """Thread-safe tally of per-evader linear solves."""

    def __init__(self):
        self._value = 0
        self._lock = threading.Lock()

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._value += n

    @property
    def value(self) -> int:
        return self._value


class _EvaderSystem:
    """Reusable solve plan for ``pi (I - M_hat) = a`` of one evader.

    Interdiction only rescales existing entries, so the sparsity pattern and
    hence any topological order are fixed.  Acyclic chains are solved as a
    lower-triangular system after permuting nodes into topological order.
    """

    def __init__(self, evader, graph, tol):
        M = evader.matrix
        n = graph.n_nodes
        self.tol = tol
        self.target = evader.target
        coo = M.tocoo()
        keep = coo.data != 0
        rows, cols, vals = coo.row[keep], coo.col[keep], coo.data[keep]
        edge_m = np.zeros(graph.n_edges)
        for i, j, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
            edge_m[graph.edge_id(i, j)] = v
        self.edge_m = edge_m
        self.used = edge_m != 0
        self.edge_entry = -(edge_m * (1.0 - graph.efficiency))
        self.tails = graph.tails

        order = topological_order(M)
        self.acyclic = order is not None
        # Single-edge gains from one visits solve are exact only if whoever
        # crosses an edge surely reaches the target afterwards: no cycles, no
        # leaking rows and no dead-end heads.
        row_sums = np.asarray(M.sum(axis=1)).ravel()
        live = row_sums > 0
        live[evader.target] = True
        self.exact_init = bool(self.acyclic and np.all(live[cols])
                               and np.all(np.abs(row_sums[rows] - 1.0) <= 1e-12))
        self.sparse = n > DENSE_LIMIT
        if self.sparse:
            self.matrix = M
            self.source = evader.source
            self.graph = graph
            return
        if self.acyclic:
            pos = np.empty(n, dtype=np.int64)
            pos[order] = np.arange(n)
        else:
            pos = np.arange(n)
            order = pos
        self.perm = order
        self.t_idx = int(pos[evader.target])
        base = np.eye(n, order="F")
        # transposed system: entry (j, i) carries -M_ij
        base[pos[cols], pos[rows]] = -vals
        self.base = base
        self.loc = (pos[graph.heads], pos[graph.tails])
        self.rhs = evader.source[order].copy()

    def _system(self, edges):
        A = self.base.copy(order="F")
        if edges:
            idx = np.fromiter(edges, dtype=np.int64, count=len(edges))
            idx = idx[self.used[idx]]
            A[self.loc[0][idx], self.loc[1][idx]] = self.edge_entry[idx]
        return A

    def visits(self, edges) -> np.ndarray:
        """Expected visits in original node order."""
        if self.sparse:
            M_hat = sp.csr_matrix(self.matrix, copy=True)
            for e in edges:
                if self.used[e]:
                    M_hat[int(self.tails[e]), int(self.graph.heads[e])] = -self.edge_entry[e]
            return expected_visits(self.source, M_hat, self.tol)
        x = self._solve(self._system(edges))
        pi = np.empty_like(x)
        pi[self.perm] = x
        return pi

    def _solve(self, A):
        if self.acyclic:
            x, info = lapack.dtrtrs(A, self.rhs, lower=1)
            return x
        return _dense_solve(A, self.rhs, self.tol)

    def capture(self, edges) -> float:
        if self.sparse:
            return _clamp_probability(1.0 - self.visits(edges)[self.target], self.tol)
        x = self._solve(self._system(edges))
        return _clamp_probability(1.0 - x[self.t_idx], self.tol)


class GainEngine:
    """Objective evaluations over one problem, with a shared counter."""

    def __init__(self, problem: ProblemInstance, counter: EvalCounter | None = None):
        self.problem = problem
        self.counter = counter if counter is not None else EvalCounter()
        self.systems = [_EvaderSystem(ev, problem.graph, problem.tolerance)
                        for ev in problem.evaders]
        self.weights = [ev.weight for ev in problem.evaders]
        self.acyclic = all(s.acyclic for s in self.systems)
        self.exact_init = all(s.exact_init for s in self.systems)

    @property
    def n_evaders(self) -> int:
        return len(self.systems)

    def objective(self, edges, count: bool = True) -> float:
        edges = tuple(edges)
        J = 0.0
        for w, system in zip(self.weights, self.systems):
            J += w * system.capture(edges)
        if count:
            self.counter.add(len(self.systems))
        return J

    def fast_init(self):
        """Gains of single edges from one visits solve per evader, and J of the empty set."""
        g = self.problem.graph
        gains = np.zeros(g.n_edges)
        J0 = 0.0
        for w, system in zip(self.weights, self.systems):
            pi = system.visits(())
            gains += pi[g.tails] * system.edge_m * w * g.efficiency
            J0 += w * _clamp_probability(1.0 - pi[system.target], system.tol)
        self.counter.add(len(self.systems))
        return gains, J0


@dataclass(order=True, frozen=True)
class GainEntry:
    """Queue entry: larger gain first, then lower edge id."""

    sort_key: tuple = field(init=False, repr=False)
    gain: float = field(compare=False)
    edge: int = field(compare=False)
    stamp: int = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sort_key", (-self.gain, self.edge))


@dataclass
class Solution:
    selected: tuple
    objective: float
    gains: tuple
    eval_count: int
    wall_time: float
    solver: str
    step_evals: tuple = ()
    step_objectives: tuple = ()
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["selected"] = [int(e) for e in self.selected]
        d["gains"] = [float(x) for x in self.gains]
        d["step_evals"] = [int(x) for x in self.step_evals]
        d["step_objectives"] = [float(x) for x in self.step_objectives]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Solution":
        return cls(
            selected=tuple(d["selected"]),
            objective=float(d["objective"]),
            gains=tuple(d.get("gains", ())),
            eval_count=int(d["eval_count"]),
            wall_time=float(d.get("wall_time", 0.0)),
            solver=d["solver"],
            step_evals=tuple(d.get("step_evals", ())),
            step_objectives=tuple(d.get("step_objectives", ())),
            config=dict(d.get("config", {})),
        )


def _check_budget(problem):
    if problem.budget > problem.graph.n_edges:
        raise InvalidInstanceError(
            f"budget {problem.budget} exceeds the number of edges {problem.graph.n_edges}")


def _pick(candidates, tie_tol):
    """Lowest edge id among gains within ``tie_tol`` of the best."""
    best = max(g for g, _ in candidates)
    return min(e for g, e in candidates if g >= best - tie_tol), best


def marginal_gain(problem: ProblemInstance, S, x: int, engine: GainEngine | None = None,
                  base: float | None = None) -> float:
    """``J(S + x) - J(S)``; only the ``J(S + x)`` solves are counted."""
    S = _edge_ids(S)
    if x in S:
        raise InvalidInstanceError(f"edge {x} is already interdicted")
    if not 0 <= x < problem.graph.n_edges:
        raise InvalidInstanceError(f"edge {x} is not in the graph")
    engine = engine or GainEngine(problem)
    if base is None:
        base = engine.objective(S, count=False)
    return engine.objective(S + (x,)) - base


def greedy_solve(problem: ProblemInstance, *, early_stop: bool = False, tie_tol: float = TIE_TOL,
                 workers: int = 1, counter: EvalCounter | None = None) -> Solution:
    """Basic greedy: every step re-evaluates every uninterdicted edge."""
    _check_budget(problem)
    start = time.perf_counter()
    engine = GainEngine(problem, counter)
    first = engine.counter.value
    E = problem.graph.n_edges
    S: list[int] = []
    chosen = np.zeros(E, dtype=bool)
    J_S = engine.objective((), count=False)
    gains, step_evals, step_J = [], [], []
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for _ in range(problem.budget):
            cands = np.flatnonzero(~chosen).tolist()
            prefix = tuple(S)
            evaluate = lambda x: engine.objective(prefix + (x,))  # noqa: E731
            values = list(pool.map(evaluate, cands)) if pool else [evaluate(x) for x in cands]
            x_star, best = _pick([(v - J_S, x) for v, x in zip(values, cands)], tie_tol)
            if early_stop and best <= 0:
                break
            J_new = values[cands.index(x_star)]
            gains.append(float(J_new - J_S))
            S.append(x_star)
            chosen[x_star] = True
            J_S = J_new
            step_evals.append(engine.counter.value - first)
            step_J.append(J_S)
    finally:
        if pool:
            pool.shutdown()
    return Solution(
        selected=tuple(S),
        objective=engine.objective(S, count=False),
        gains=tuple(gains),
        eval_count=engine.counter.value - first,
        wall_time=time.perf_counter() - start,
        solver="greedy",
        step_evals=tuple(step_evals),
        step_objectives=tuple(step_J),
        config={"budget": problem.budget, "early_stop": early_stop, "tie_tol": tie_tol},
    )


def fast_init_gains(problem: ProblemInstance, engine: GainEngine | None = None):
    """``[(edge, gain of interdicting it alone)]`` from one solve per evader.

    Exact for non-retreating chains whose rows all sum to one, an upper bound
    otherwise.
    """
    engine = engine or GainEngine(problem)
    gains, _ = engine.fast_init()
    return [(e, float(g)) for e, g in enumerate(gains)]


def priority_greedy_solve(problem: ProblemInstance, *, early_stop: bool = False,
                          tie_tol: float = TIE_TOL, counter: EvalCounter | None = None) -> Solution:
    """Lazy greedy seeded by fast initialisation.

    Queue values are upper bounds on current gains (submodularity).  An entry
    stamped with the current step is fresh.  Popping continues until the best
    remaining bound cannot reach the tie band of the best fresh gain, so the
    choice matches the basic greedy including ties.
    """
    _check_budget(problem)
    start = time.perf_counter()
    engine = GainEngine(problem, counter)
    first = engine.counter.value
    init, J_S = engine.fast_init()
    # fast-init values are exact step-1 gains only for non-retreating, non-leaking chains;
    # otherwise they are upper bounds and must be rechecked like stale entries
    init_stamp = 1 if engine.exact_init else 0
    heap = [GainEntry(float(g), e, init_stamp) for e, g in enumerate(init)]
    heapq.heapify(heap)
    S: list[int] = []
    gains, step_evals, step_J = [], [], []
    for step in range(1, problem.budget + 1):
        held = []  # (gain, edge, J(S + edge) or None)
        best = -math.inf
        while heap:
            if held and heap[0].gain < best - 2 * tie_tol:
                break
            entry = heapq.heappop(heap)
            if entry.stamp == step:
                held.append((entry.gain, entry.edge, None))
            else:
                J_new = engine.objective(tuple(S) + (entry.edge,))
                held.append((J_new - J_S, entry.edge, J_new))
            best = max(best, held[-1][0])
        x_star, best = _pick([(g, e) for g, e, _ in held], tie_tol)
        if early_stop and best <= 0:
            break
        for g, e, J_new in held:
            if e == x_star:
                gains.append(float(g))
                J_S = J_new if J_new is not None else J_S + g
            else:
                heapq.heappush(heap, GainEntry(g, e, step))
        S.append(x_star)
        step_evals.append(engine.counter.value - first)
        step_J.append(J_S)
    return Solution(
        selected=tuple(S),
        objective=engine.objective(S, count=False),
        gains=tuple(gains),
        eval_count=engine.counter.value - first,
        wall_time=time.perf_counter() - start,
        solver="priority",
        step_evals=tuple(step_evals),
        step_objectives=tuple(step_J),
        config={"budget": problem.budget, "early_stop": early_stop, "tie_tol": tie_tol,
                "exact_init": engine.exact_init},
    )


def brute_force_solve(problem: ProblemInstance, max_combinations: int = 2_000_000, *,
                      at_most: bool = False, tie_tol: float = TIE_TOL,
                      counter: EvalCounter | None = None) -> Solution:
    """Exhaustive search over size-B subsets (or all sizes up to B).

    Subsets are visited in lexicographic order and a later subset replaces
    the incumbent only when strictly better beyond ``tie_tol``.
    """
    _check_budget(problem)
    E, B = problem.graph.n_edges, problem.budget
    sizes = range(B + 1) if at_most else (B,)
    total = sum(math.comb(E, b) for b in sizes)
    if total > max_combinations:
        raise InvalidInstanceError(
            f"{total} subsets exceed the limit of {max_combinations}")
    start = time.perf_counter()
    engine = GainEngine(problem, counter)
    first = engine.counter.value
    best_set, best_J = None, -math.inf
    for b in sizes:
        for subset in combinations(range(E), b):
            J = engine.objective(subset)
            if J > best_J + tie_tol:
                best_set, best_J = subset, J
    return Solution(
        selected=tuple(best_set),
        objective=best_J,
        gains=(),
        eval_count=engine.counter.value - first,
        wall_time=time.perf_counter() - start,
        solver="exact",
        config={"budget": B, "at_most": at_most, "subsets": total},
    )


@dataclass
class BoundReport:
    ratio: float
    bound: float
    greedy_objective: float
    exact_objective: float
    passed: bool


def verify_bound(greedy: Solution, exact: Solution, tol: float = 1e-9) -> BoundReport:
    """Check ``J_greedy >= (1 - 1/e) J_opt``."""
    bound = (1 - 1 / math.e) * exact.objective
    ratio = greedy.objective / exact.objective if exact.objective > 0 else 1.0
    return BoundReport(ratio, bound, greedy.objective, exact.objective,
                       greedy.objective >= bound - tol)


SOLVERS = {
    "greedy": greedy_solve,
    "priority": priority_greedy_solve,
    "exact": brute_force_solve,
}
