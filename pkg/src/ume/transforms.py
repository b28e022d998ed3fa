"""Reductions between edge interdiction and node interdiction.

Node interdiction here means: interdicting node ``v`` scales every
transition *into* ``v`` by ``(1 - d_v)``, i.e. all edges leading to ``v``
are interdicted together.  An evader that starts at ``v`` is not exposed to
``v``'s device.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import (
    EvaderSpec,
    Graph,
    InvalidInstanceError,
    ProblemInstance,
    _clamp_probability,
    expected_visits,
    reaching_nodes,
    validate_chain,
)

__all__ = [
    "EDGE_TO_NODE",
    "NODE_TO_EDGE",
    "NodeProblem",
    "TransformMap",
    "node_objective",
    "edge_problem_to_node_problem",
    "node_problem_to_edge_problem",
    "solve_node_problem",
]

EDGE_TO_NODE = "edge->node"
NODE_TO_EDGE = "node->edge"


@dataclass(frozen=True, eq=False)
class NodeProblem:
    """Node-interdiction instance; edge efficiencies of ``graph`` are ignored."""

    graph: Graph
    node_efficiency: np.ndarray
    evaders: tuple[EvaderSpec, ...]
    budget: int
    tolerance: float = 1e-9

    def __post_init__(self):
        d = np.asarray(self.node_efficiency, dtype=float).reshape(-1)
        if len(d) != self.graph.n_nodes:
            raise InvalidInstanceError("need one efficiency per node")
        if np.isnan(d).any() or np.any(d < 0) or np.any(d > 1):
            raise InvalidInstanceError("node efficiency must lie in [0, 1]")
        if not 0 <= self.budget <= self.graph.n_nodes:
            raise InvalidInstanceError(f"budget {self.budget} outside 0..{self.graph.n_nodes}")
        d.setflags(write=False)
        object.__setattr__(self, "node_efficiency", d)
        object.__setattr__(self, "evaders", tuple(self.evaders))
        total = sum(ev.weight for ev in self.evaders)
        if abs(total - 1.0) > 1e-12:
            raise InvalidInstanceError(f"evader weights sum to {total!r}, not 1")
        for k, ev in enumerate(self.evaders):
            report = validate_chain(ev.matrix, ev.target, self.graph)
            if not report.passed:
                raise InvalidInstanceError(f"evader {k}: " + "; ".join(report.errors))


@dataclass(frozen=True)
class TransformMap:
    """Correspondence between interdictable elements of two formulations.

    ``forward[x]`` is the element of the new problem standing for original
    element ``x``.  ``node_origin`` / ``edge_origin`` describe every node
    and edge of the new graph as ``[kind, id]`` pairs.
    """

    direction: str
    forward: tuple
    node_origin: tuple
    edge_origin: tuple

    def translate(self, S) -> tuple:
        return tuple(self.forward[int(x)] for x in S)

    def back(self, S) -> tuple:
        inverse = {y: x for x, y in enumerate(self.forward)}
        try:
            return tuple(inverse[int(y)] for y in S)
        except KeyError as exc:
            raise InvalidInstanceError(f"element {exc.args[0]} has no preimage") from None

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "forward": list(self.forward),
            "node_origin": [list(o) for o in self.node_origin],
            "edge_origin": [list(o) for o in self.edge_origin],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransformMap":
        if d["direction"] not in (EDGE_TO_NODE, NODE_TO_EDGE):
            raise InvalidInstanceError(f"unknown transform direction {d['direction']!r}")
        return cls(d["direction"], tuple(int(x) for x in d["forward"]),
                   tuple(tuple(o) for o in d["node_origin"]),
                   tuple(tuple(o) for o in d["edge_origin"]))


def node_objective(problem: NodeProblem, Y, counter=None) -> float:
    """Weighted capture probability when the nodes in ``Y`` are interdicted."""
    Y = sorted(set(int(v) for v in Y))
    n = problem.graph.n_nodes
    scale = np.ones(n)
    scale[Y] = 1.0 - problem.node_efficiency[Y]
    total = 0.0
    for ev in problem.evaders:
        M_hat = ev.matrix @ sp.diags(scale)
        pi = expected_visits(ev.source, M_hat, problem.tolerance)
        total += ev.weight * _clamp_probability(1.0 - pi[ev.target], problem.tolerance)
        if counter is not None:
            counter.add(1)
    return total


def edge_problem_to_node_problem(problem: ProblemInstance) -> tuple[NodeProblem, TransformMap]:
    """Split every edge ``e = (i, j)`` with a new node ``v_e = n + e``.

    ``(i, v_e)`` gets edge id ``2e`` and ``(v_e, j)`` id ``2e + 1``; only
    ``v_e`` is interdictable, with efficiency ``d_e``.
    """
    g = problem.graph
    n, E = g.n_nodes, g.n_edges
    mid = n + np.arange(E)
    tails = np.empty(2 * E, dtype=np.int64)
    heads = np.empty(2 * E, dtype=np.int64)
    tails[0::2], heads[0::2] = g.tails, mid
    tails[1::2], heads[1::2] = mid, g.heads
    costs = np.zeros(2 * E)
    costs[0::2] = g.costs
    new_graph = Graph(n + E, tails, heads, costs, np.zeros(2 * E))
    d = np.concatenate([np.zeros(n), g.efficiency])

    evaders = []
    for ev in problem.evaders:
        reach = reaching_nodes(ev.matrix, ev.target)
        m = np.asarray(ev.matrix[g.tails, g.heads]).ravel()
        # the split node forwards everything unless its head is a dead end
        onward = ((m > 0) & reach[g.heads]).astype(float)
        M = sp.csr_matrix((np.concatenate([m, onward]),
                           (np.concatenate([g.tails, mid]), np.concatenate([mid, g.heads]))),
                          shape=(n + E, n + E))
        M.eliminate_zeros()
        a = np.concatenate([ev.source, np.zeros(E)])
        evaders.append(EvaderSpec(ev.weight, a, ev.target, M))

    tmap = TransformMap(
        EDGE_TO_NODE,
        forward=tuple(int(v) for v in mid),
        node_origin=tuple(("node", v) for v in range(n)) + tuple(("edge", e) for e in range(E)),
        edge_origin=tuple(o for e in range(E) for o in (("edge-in", e), ("edge-out", e))),
    )
    return NodeProblem(new_graph, d, tuple(evaders), problem.budget, problem.tolerance), tmap


def node_problem_to_edge_problem(problem: NodeProblem) -> tuple[ProblemInstance, TransformMap]:
    """Replace every node ``v`` by ``v -> n + v`` carrying ``d_v``.

    In-edges of ``v`` enter ``v``, out-edges leave ``n + v``.  The internal
    edge of ``v`` has id ``v``; original edge ``e`` becomes id ``n + e``
    with efficiency 0.  Sources and targets move to the exit copy ``n + v``.
    """
    g = problem.graph
    n, E = g.n_nodes, g.n_edges
    nodes = np.arange(n)
    tails = np.concatenate([nodes, n + g.tails])
    heads = np.concatenate([n + nodes, g.heads])
    costs = np.concatenate([np.zeros(n), g.costs])
    eff = np.concatenate([problem.node_efficiency, np.zeros(E)])
    new_graph = Graph(2 * n, tails, heads, costs, eff)

    evaders = []
    for ev in problem.evaders:
        reach = reaching_nodes(ev.matrix, ev.target)
        m = np.asarray(ev.matrix[g.tails, g.heads]).ravel()
        M = sp.csr_matrix((np.concatenate([reach.astype(float), m]), (tails, heads)),
                          shape=(2 * n, 2 * n))
        M.eliminate_zeros()
        a = np.concatenate([np.zeros(n), ev.source])
        evaders.append(EvaderSpec(ev.weight, a, n + ev.target, M))

    tmap = TransformMap(
        NODE_TO_EDGE,
        forward=tuple(range(n)),
        node_origin=tuple(("node-in", v) for v in range(n)) + tuple(("node-out", v) for v in range(n)),
        edge_origin=tuple(("node", v) for v in range(n)) + tuple(("edge", e) for e in range(E)),
    )
    return ProblemInstance(new_graph, tuple(evaders), problem.budget, problem.tolerance), tmap


def solve_node_problem(problem: NodeProblem, solver):
    """Run an edge solver on the reduced problem; returns (nodes, solution)."""
    edge_problem, tmap = node_problem_to_edge_problem(problem)
    solution = solver(edge_problem)
    return tmap.back(solution.selected), solution
