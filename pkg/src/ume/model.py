"""Graph and evader data model, interdicted chains and the capture objective.

An evader is an absorbing Markov chain on a directed graph.  Interdicting
edge (i, j) with efficiency d scales the transition probability M_ij by
(1 - d).  The capture probability of one evader is one minus the expected
number of visits to its target, obtained from a single linear solve of
pi (I - M_hat) = a.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import pairwise
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack
from scipy.sparse.csgraph import breadth_first_order, dijkstra
from scipy.sparse.linalg import splu

__all__ = [
    "ROW_SUM_SLACK",
    "DENSE_LIMIT",
    "InvalidInstanceError",
    "NumericalError",
    "NonAbsorbingChainError",
    "CycleError",
    "Graph",
    "EvaderSpec",
    "InterdictionSet",
    "ProblemInstance",
    "ChainReport",
    "build_evader_transition",
    "validate_chain",
    "apply_interdiction",
    "expected_visits",
    "evader_objective",
    "objective",
    "unreachable_mass",
    "reaching_nodes",
    "topological_order",
    "path_objective_oracle",
]

ROW_SUM_SLACK = 1e-12
# Above this many nodes, solves switch from dense LAPACK to sparse LU.
DENSE_LIMIT = 1500
# A residual above this is a refusal, not a warning.
RESIDUAL_REFUSAL = 1e-6


class InvalidInstanceError(ValueError):
    """Malformed graph, chain or instance data."""


class NumericalError(ArithmeticError):
    """A solve produced an unusable result."""


class NonAbsorbingChainError(NumericalError):
    pass


class CycleError(InvalidInstanceError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Directed graph with dense node ids and dense edge ids.

    Edge ``e`` runs ``tails[e] -> heads[e]`` with traversal cost
    ``costs[e]`` and interdiction efficiency ``efficiency[e]``.
    """

    n_nodes: int
    tails: np.ndarray
    heads: np.ndarray
    costs: np.ndarray
    efficiency: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tails = np.asarray(self.tails, dtype=np.int64).reshape(-1)
        heads = np.asarray(self.heads, dtype=np.int64).reshape(-1)
        costs = np.asarray(self.costs, dtype=float).reshape(-1)
        eff = np.asarray(self.efficiency, dtype=float).reshape(-1)
        n_edges = len(tails)
        if not (len(heads) == len(costs) == len(eff) == n_edges):
            raise InvalidInstanceError("edge arrays have mismatched lengths")
        if self.n_nodes < 0:
            raise InvalidInstanceError("negative node count")
        if n_edges and (tails.min() < 0 or heads.min() < 0
                        or max(tails.max(), heads.max()) >= self.n_nodes):
            raise InvalidInstanceError("edge endpoint outside 0..n_nodes-1")
        if np.any(tails == heads):
            raise InvalidInstanceError("self-loops are not allowed")
        if np.isnan(costs).any() or np.any(costs < 0):
            raise InvalidInstanceError("edge costs must be non-negative numbers")
        if np.isnan(eff).any() or np.any(eff < 0) or np.any(eff > 1):
            raise InvalidInstanceError("interdiction efficiency must lie in [0, 1]")
        index = {}
        for e, (i, j) in enumerate(zip(tails.tolist(), heads.tolist())):
            if (i, j) in index:
                raise InvalidInstanceError(f"duplicate edge ({i}, {j})")
            index[(i, j)] = e
        for name, arr in (("tails", tails), ("heads", heads), ("costs", costs), ("efficiency", eff)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[Sequence[float]]) -> "Graph":
        """Build from ``(tail, head[, cost[, d]])`` tuples; cost defaults to 1, d to 0."""
        rows = [tuple(e) for e in edges]
        tails = [int(r[0]) for r in rows]
        heads = [int(r[1]) for r in rows]
        costs = [float(r[2]) if len(r) > 2 else 1.0 for r in rows]
        eff = [float(r[3]) if len(r) > 3 else 0.0 for r in rows]
        return cls(n_nodes, np.array(tails, dtype=np.int64), np.array(heads, dtype=np.int64),
                   np.array(costs), np.array(eff))

    @property
    def n_edges(self) -> int:
        return len(self.tails)

    def edge(self, e: int) -> tuple[int, int]:
        return int(self.tails[e]), int(self.heads[e])

    def edge_id(self, tail: int, head: int) -> int:
        try:
            return self._index[(tail, head)]
        except KeyError:
            raise InvalidInstanceError(f"no edge ({tail}, {head})") from None

    def has_edge(self, tail: int, head: int) -> bool:
        return (tail, head) in self._index

    def with_costs(self, costs) -> "Graph":
        costs = np.broadcast_to(np.asarray(costs, dtype=float), (self.n_edges,)).copy()
        return Graph(self.n_nodes, self.tails, self.heads, costs, self.efficiency)

    def with_efficiency(self, efficiency) -> "Graph":
        eff = np.broadcast_to(np.asarray(efficiency, dtype=float), (self.n_edges,)).copy()
        return Graph(self.n_nodes, self.tails, self.heads, self.costs, eff)

    def cost_matrix(self) -> sp.csr_matrix:
        # explicit zeros survive and count as zero-cost edges for csgraph
        return sp.csr_matrix((self.costs.astype(float), (self.tails, self.heads)),
                             shape=(self.n_nodes, self.n_nodes))


@dataclass(frozen=True, eq=False)
class EvaderSpec:
    """One evader: weight, source distribution, target node and chain.

    ``model_lambda`` records that the chain came from
    :func:`build_evader_transition`; it is provenance only.
    """

    weight: float
    source: np.ndarray
    target: int
    matrix: sp.csr_matrix
    model_lambda: float | None = None

    def __post_init__(self):
        src = np.asarray(self.source, dtype=float).reshape(-1)
        mat = sp.csr_matrix(self.matrix, dtype=float)
        mat.sum_duplicates()
        mat.sort_indices()
        n = len(src)
        if mat.shape != (n, n):
            raise InvalidInstanceError(f"matrix shape {mat.shape} does not match source length {n}")
        if not 0 < self.weight <= 1:
            raise InvalidInstanceError(f"evader weight {self.weight} outside (0, 1]")
        if np.isnan(src).any() or np.any(src < 0):
            raise InvalidInstanceError("source distribution has negative entries")
        if abs(src.sum() - 1.0) > 1e-12:
            raise InvalidInstanceError(f"source distribution sums to {src.sum()!r}, not 1")
        if not 0 <= self.target < n:
            raise InvalidInstanceError(f"target {self.target} is not a node")
        src.setflags(write=False)
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "target", int(self.target))
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def n_nodes(self) -> int:
        return len(self.source)


@dataclass(frozen=True)
class InterdictionSet:
    """Edges chosen by the interdictor, in selection order."""

    selected: tuple[int, ...] = ()

    def __post_init__(self):
        sel = tuple(int(e) for e in self.selected)
        if len(set(sel)) != len(sel):
            raise InvalidInstanceError(f"duplicate edges in interdiction set {sel}")
        object.__setattr__(self, "selected", sel)

    @classmethod
    def from_indicator(cls, r) -> "InterdictionSet":
        return cls(tuple(int(e) for e in np.flatnonzero(np.asarray(r) > 0.5)))

    def indicator(self, n_edges: int) -> np.ndarray:
        r = np.zeros(n_edges, dtype=np.int8)
        r[list(self.selected)] = 1
        return r

    def add(self, e: int) -> "InterdictionSet":
        return InterdictionSet(self.selected + (int(e),))

    def __len__(self) -> int:
        return len(self.selected)

    def __iter__(self) -> Iterator[int]:
        return iter(self.selected)

    def __contains__(self, e) -> bool:
        return e in self.selected


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    graph: Graph
    evaders: tuple[EvaderSpec, ...]
    budget: int
    tolerance: float = 1e-9

    def __post_init__(self):
        evaders = tuple(self.evaders)
        object.__setattr__(self, "evaders", evaders)
        if not evaders:
            raise InvalidInstanceError("at least one evader is required")
        if not 0 <= self.budget <= self.graph.n_edges:
            raise InvalidInstanceError(
                f"budget {self.budget} outside 0..{self.graph.n_edges} (number of edges)")
        if not self.tolerance > 0:
            raise InvalidInstanceError("tolerance must be positive")
        total = math.fsum(ev.weight for ev in evaders)
        if abs(total - 1.0) > 1e-12:
            raise InvalidInstanceError(f"evader weights sum to {total!r}, not 1")
        for k, ev in enumerate(evaders):
            if ev.n_nodes != self.graph.n_nodes:
                raise InvalidInstanceError(f"evader {k} is sized for {ev.n_nodes} nodes")
            report = validate_chain(ev.matrix, ev.target, self.graph)
            if not report.passed:
                raise InvalidInstanceError(f"evader {k}: " + "; ".join(report.errors))

    @property
    def n_evaders(self) -> int:
        return len(self.evaders)

    def with_budget(self, budget: int) -> "ProblemInstance":
        return ProblemInstance(self.graph, self.evaders, budget, self.tolerance)


def _edge_ids(S) -> tuple[int, ...]:
    if isinstance(S, InterdictionSet):
        return S.selected
    return InterdictionSet(tuple(S)).selected


# --- evader model -----------------------------------------------------------

def build_evader_transition(graph: Graph, target: int, lam: float) -> sp.csr_matrix:
    """Non-retreating chain: from ``i`` move only to strictly closer neighbours.

    Closeness is least-cost distance ``D`` to the target.  Among allowed moves
    the probability of ``i -> j`` is proportional to
    ``exp(-(c_ij + D(j) - D(i)) / lam)``.  Rows of the target and of nodes
    with no allowed move are zero.
    """
    if not 0 <= target < graph.n_nodes:
        raise InvalidInstanceError(f"target {target} is not a node")
    if not lam > 0:
        raise InvalidInstanceError(f"lambda must be positive, got {lam}")
    if not np.all(np.isfinite(graph.costs)):
        raise InvalidInstanceError("edge costs must be finite")
    n = graph.n_nodes
    # distances to the target = distances from it in the reversed graph
    dist = dijkstra(graph.cost_matrix().T.tocsr(), directed=True, indices=target)
    tails, heads = graph.tails, graph.heads
    allowed = np.isfinite(dist[tails]) & (dist[heads] < dist[tails]) & (tails != target)
    with np.errstate(invalid="ignore"):  # inf - inf on edges that are never allowed
        excess = graph.costs + dist[heads] - dist[tails]
    rows, cols, vals = [], [], []
    order = np.argsort(tails, kind="stable")
    for i, group in _group_by(tails[order], order):
        group = group[allowed[group]]
        if len(group) == 0:
            continue
        x = excess[group]
        w = np.exp(-(x - x.min()) / lam)
        rows.append(np.full(len(group), i))
        cols.append(heads[group])
        vals.append(w / w.sum())
    if not rows:
        return sp.csr_matrix((n, n))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def _group_by(sorted_keys: np.ndarray, payload: np.ndarray):
    if len(sorted_keys) == 0:
        return
    cuts = np.flatnonzero(np.diff(sorted_keys)) + 1
    for lo, hi in pairwise([0, *cuts.tolist(), len(sorted_keys)]):
        yield int(sorted_keys[lo]), payload[lo:hi]


# --- chain validation --------------------------------------------------------

@dataclass
class ChainReport:
    row_sums: np.ndarray
    unreachable: frozenset
    errors: list

    @property
    def passed(self) -> bool:
        return not self.errors


def _positive_pattern(M: sp.csr_matrix) -> sp.csr_matrix:
    P = (M > 0).astype(np.int8).tocsr()
    P.eliminate_zeros()
    return P


def reaching_nodes(M, target: int) -> np.ndarray:
    """Boolean mask of nodes that reach ``target`` through positive entries."""
    M = sp.csr_matrix(M)
    reach = np.zeros(M.shape[0], dtype=bool)
    order = breadth_first_order(_positive_pattern(M).T.tocsr(), target, directed=True,
                                return_predecessors=False)
    reach[order] = True
    return reach


def validate_chain(M, t: int, graph: Graph | None = None) -> ChainReport:
    """Check the absorbing-chain conditions without raising."""
    M = sp.csr_matrix(M, dtype=float)
    n = M.shape[0]
    errors = []
    if M.shape != (n, n):
        return ChainReport(np.array([]), frozenset(), [f"matrix is not square: {M.shape}"])
    if not 0 <= t < n:
        return ChainReport(np.asarray(M.sum(axis=1)).ravel(), frozenset(),
                           [f"target {t} is not a node"])
    coo = M.tocoo()
    if coo.nnz and (np.isnan(coo.data).any() or coo.data.min() < 0):
        errors.append("negative or NaN transition probability")
    row_sums = np.asarray(M.sum(axis=1)).ravel()
    bad = np.flatnonzero(row_sums > 1 + ROW_SUM_SLACK)
    if len(bad):
        errors.append(f"row sums exceed 1 at nodes {bad[:10].tolist()}")
    if M.getrow(t).count_nonzero():
        errors.append("target row nonzero")
    pos = coo.data > 0
    if np.any(coo.row[pos] == coo.col[pos]):
        errors.append("positive self-transition")
    if graph is not None:
        if graph.n_nodes != n:
            errors.append(f"matrix has {n} nodes, graph has {graph.n_nodes}")
        else:
            off = [(i, j) for i, j in zip(coo.row[pos].tolist(), coo.col[pos].tolist())
                   if not graph.has_edge(i, j)]
            if off:
                errors.append(f"positive transitions without an edge: {off[:5]}")
    reach = reaching_nodes(M, t)
    unreachable = frozenset(int(i) for i in np.flatnonzero(~reach))
    live = np.diff(_positive_pattern(M).indptr) > 0
    stuck = np.flatnonzero(live & ~reach)
    if len(stuck):
        errors.append(f"nodes {stuck[:10].tolist()} have transitions but cannot reach the target")
    return ChainReport(row_sums, unreachable, errors)


def unreachable_mass(evader: EvaderSpec) -> float:
    """Source mass on nodes that cannot reach the target at all."""
    reach = reaching_nodes(evader.matrix, evader.target)
    return float(math.fsum(evader.source[~reach]))


# --- interdiction and solves ---------------------------------------------------

def apply_interdiction(M, S, graph: Graph) -> sp.csr_matrix:
    """Return ``M_hat`` with ``M_ij (1 - d_ij)`` on interdicted edges."""
    M_hat = sp.csr_matrix(M, dtype=float, copy=True)
    M_hat.sort_indices()
    for e in _edge_ids(S):
        if not 0 <= e < graph.n_edges:
            raise InvalidInstanceError(f"edge {e} is not in the graph")
        i, j = graph.edge(e)
        lo, hi = M_hat.indptr[i], M_hat.indptr[i + 1]
        k = lo + np.searchsorted(M_hat.indices[lo:hi], j)
        if k < hi and M_hat.indices[k] == j:
            M_hat.data[k] = M_hat.data[k] * (1.0 - graph.efficiency[e])
    return M_hat


def _dense_solve(At: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    lu, piv, info = lapack.dgetrf(At)
    if info > 0:
        raise NonAbsorbingChainError("non-absorbing chain: I - M is singular")
    anorm = np.abs(At).sum(axis=0).max()
    rcond, _ = lapack.dgecon(lu, anorm)
    if rcond < tol:
        raise NonAbsorbingChainError(
            f"non-absorbing chain: condition number {1 / max(rcond, 1e-300):.3g} exceeds 1/tolerance")
    x, _ = lapack.dgetrs(lu, piv, b)
    return x


def expected_visits(a, M_hat, tol: float = 1e-9) -> np.ndarray:
    """Expected visits ``pi`` with ``pi (I - M_hat) = a`` (one transposed solve)."""
    a = np.asarray(a, dtype=float)
    n = len(a)
    if sp.issparse(M_hat):
        A = sp.identity(n, format="csr") - sp.csr_matrix(M_hat)
    else:
        A = np.eye(n) - np.asarray(M_hat, dtype=float)
    if n <= DENSE_LIMIT:
        At = np.array(A.T.toarray() if sp.issparse(A) else A.T, order="F")
        pi = _dense_solve(At, a, tol)
    else:
        try:
            lu = splu(sp.csc_matrix(A.T))
        except RuntimeError as exc:
            raise NonAbsorbingChainError(f"non-absorbing chain: {exc}") from exc
        pi = lu.solve(a)
    if not np.all(np.isfinite(pi)):
        raise NonAbsorbingChainError("non-absorbing chain: solve produced non-finite visits")
    scale = max(1.0, float(np.abs(a).sum()))
    resid = np.abs(A.T @ pi - a).max() if n else 0.0
    if resid > tol * scale:
        # one step of iterative refinement before giving up
        if n <= DENSE_LIMIT:
            pi = pi + _dense_solve(At, a - A.T @ pi, tol)
        else:
            pi = pi + lu.solve(a - A.T @ pi)
        resid = np.abs(A.T @ pi - a).max()
        if resid > RESIDUAL_REFUSAL * scale:
            raise NumericalError(f"linear solve residual {resid:.3g} above {RESIDUAL_REFUSAL}")
    return pi


def _clamp_probability(value: float, tol: float) -> float:
    if value < -tol or value > 1 + tol or math.isnan(value):
        raise NumericalError(f"capture probability {value!r} outside [0, 1]")
    return float(min(1.0, max(0.0, value)))


def evader_objective(evader: EvaderSpec, S, graph: Graph, tol: float = 1e-9) -> float:
    """Probability that ``evader`` never reaches its target under ``S``."""
    M_hat = apply_interdiction(evader.matrix, S, graph)
    pi = expected_visits(evader.source, M_hat, tol)
    return _clamp_probability(1.0 - pi[evader.target], tol)


def objective(problem: ProblemInstance, S, counter=None) -> float:
    """Weighted capture probability over all evaders.

    ``counter`` (anything with ``add(n)``) is charged one evaluation per
    evader solved.
    """
    S = _edge_ids(S)
    total = 0.0
    for ev in problem.evaders:
        total += ev.weight * evader_objective(ev, S, problem.graph, problem.tolerance)
        if counter is not None:
            counter.add(1)
    return total


def topological_order(M) -> np.ndarray | None:
    """Order of nodes along positive transitions, or None if there is a cycle."""
    P = _positive_pattern(sp.csr_matrix(M))
    n = P.shape[0]
    indeg = np.bincount(P.indices, minlength=n)
    queue = deque(np.flatnonzero(indeg == 0).tolist())
    order = []
    indptr, indices = P.indptr, P.indices
    while queue:
        i = queue.popleft()
        order.append(i)
        for j in indices[indptr[i]:indptr[i + 1]].tolist():
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(j)
    if len(order) < n:
        return None
    return np.asarray(order, dtype=np.int64)


# --- path enumeration oracle ---------------------------------------------------

def path_objective_oracle(evader: EvaderSpec, S, graph: Graph, max_paths: int = 10_000) -> float:
    """Capture probability by summing over every source-to-target path.

    Each path ``p`` with probability ``Q(p)`` is caught with probability
    ``1 - prod(1 - d)`` over its interdicted edges; mass that never reaches
    the target even without interdiction is counted as caught.
    """
    S = set(_edge_ids(S))
    M = evader.matrix
    t = evader.target
    indptr, indices, data = M.indptr, M.indices, M.data
    caught = 0.0
    reached = 0.0
    n_paths = 0
    for s in np.flatnonzero(evader.source > 0).tolist():
        a_s = float(evader.source[s])
        # iterative DFS over (node, prob, survive, on-path set)
        stack = [(s, a_s, 1.0, (s,))]
        while stack:
            i, q, survive, path = stack.pop()
            if i == t:
                n_paths += 1
                if n_paths > max_paths:
                    raise InvalidInstanceError(f"more than {max_paths} source-target paths")
                reached += q
                caught += q * (1.0 - survive)
                continue
            for k in range(indptr[i], indptr[i + 1]):
                j, m = int(indices[k]), float(data[k])
                if m <= 0:
                    continue
                if j in path:
                    raise CycleError(f"acyclic required: chain has a cycle through node {j}")
                e = graph.edge_id(i, j)
                f = (1.0 - graph.efficiency[e]) if e in S else 1.0
                stack.append((j, q * m, survive * f, path + (j,)))
    return caught + (1.0 - reached)
