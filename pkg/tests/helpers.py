"""Small fixed instances and random instance generators shared by the tests."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ume import EvaderSpec, Graph, ProblemInstance, reaching_nodes

S, V, T = 0, 1, 2


def chain(d=0.5, budget=1):
    """s -> v -> t with one evader starting at s."""
    g = Graph.from_edges(3, [(S, V, 1.0, d), (V, T, 1.0, d)])
    M = sp.csr_matrix(([1.0, 1.0], ([S, V], [V, T])), shape=(3, 3))
    ev = EvaderSpec(1.0, [1.0, 0.0, 0.0], T, M)
    return ProblemInstance(g, [ev], budget)


def diamond(p_a=0.8, d=1.0, budget=1):
    """s=0, a=1, b=2, t=3; edges (s,a)=0, (s,b)=1, (a,t)=2, (b,t)=3."""
    g = Graph.from_edges(4, [(0, 1, 1.0, d), (0, 2, 1.0, d), (1, 3, 1.0, d), (2, 3, 1.0, d)])
    M = sp.csr_matrix(([p_a, 1 - p_a, 1.0, 1.0], ([0, 0, 1, 2], [1, 2, 3, 3])), shape=(4, 4))
    ev = EvaderSpec(1.0, [1.0, 0, 0, 0], 3, M)
    return ProblemInstance(g, [ev], budget)


def random_chain(rng, n, target, *, acyclic=True, density=0.35, leak=0.0, back=0.15):
    """Random absorbing chain on ``n`` nodes as ``(edges, M)``.

    Nodes are ranked by a random permutation with the target last.  Forward
    edges go to higher rank; with ``acyclic=False`` some backward edges are
    added too.  Rows of nodes that cannot reach the target are dropped, so
    every remaining row belongs to a node that reaches it.
    """
    others = [v for v in rng.permutation(n) if v != target]
    order = others + [target]
    rank = {v: r for r, v in enumerate(order)}
    pairs = set()
    for i in others:
        later = [j for j in order if rank[j] > rank[i]]
        for j in later:
            if rng.random() < density:
                pairs.add((i, j))
        if not acyclic:
            for j in others:
                if rank[j] < rank[i] and rng.random() < back:
                    pairs.add((i, j))
    pairs = sorted(pairs)
    rows = {}
    for i, j in pairs:
        rows.setdefault(i, []).append(j)
    # pattern-level reachability, then weights only on edges into reaching nodes
    P = sp.csr_matrix((np.ones(len(pairs)), ([p[0] for p in pairs], [p[1] for p in pairs])),
                      shape=(n, n)) if pairs else sp.csr_matrix((n, n))
    reach = reaching_nodes(P, target)
    tri_i, tri_j, tri_v = [], [], []
    for i, heads in rows.items():
        heads = [j for j in heads if reach[j]]
        if not heads or not reach[i]:
            continue
        w = rng.dirichlet(np.ones(len(heads)))
        scale = 1.0 - leak * rng.random()
        for j, p in zip(heads, w):
            tri_i.append(i)
            tri_j.append(j)
            tri_v.append(p * scale)
    M = sp.csr_matrix((tri_v, (tri_i, tri_j)), shape=(n, n))
    return pairs, M


def random_problem(rng, n=8, *, n_evaders=2, acyclic=True, budget=1, density=0.35, leak=0.0,
                   back=0.15, source_mass=None):
    """Random instance whose evaders share one graph (the union of their chains)."""
    chains = []
    for _ in range(n_evaders):
        t = int(rng.integers(n))
        pairs, M = random_chain(rng, n, t, acyclic=acyclic, density=density, leak=leak, back=back)
        chains.append((t, pairs, M))
    union = sorted({p for _, pairs, _ in chains for p in pairs})
    if not union:
        union = [(0, 1)]
    eff = rng.uniform(0.1, 1.0, len(union))
    g = Graph.from_edges(n, [(i, j, 1.0, d) for (i, j), d in zip(union, eff)])
    weights = rng.dirichlet(np.ones(n_evaders))
    weights[-1] = 1.0 - weights[:-1].sum()
    evaders = []
    for (t, _, M), w in zip(chains, weights):
        a = np.zeros(n)
        cand = [v for v in range(n) if v != t]
        k = source_mass or int(rng.integers(1, 4))
        picks = rng.choice(cand, size=min(k, len(cand)), replace=False)
        a[picks] = rng.dirichlet(np.ones(len(picks)))
        a /= a.sum()
        evaders.append(EvaderSpec(float(w), a, t, M))
    return ProblemInstance(g, evaders, min(budget, g.n_edges))
