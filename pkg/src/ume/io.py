"""JSON instance and solution files.

Instance layout (``format: "ume-instance"``, ``version: 1``)::

    {
      "interdiction": "edge",            # or "node"
      "nodes": [0, 1, ...],              # dense ids
      "edges": [[id, tail, head, cost, d], ...],
      "node_efficiency": [...],          # node problems only
      "evaders": [
        {"weight": w, "target": t, "source": {"0": 0.5, "3": 0.5},
         "matrix": [[i, j, p], ...]}     # explicit chain, or
        {"weight": w, "target": t, "source": {...}, "model": {"lambda": 0.1}}
      ],
      "budget": B,
      "tolerance": 1e-9,
      "transform": {...},                # optional TransformMap
      "meta": {...}                      # optional, free form
    }

Floats are written with ``repr`` so a write/read round trip is bit-exact.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np
import scipy.sparse as sp

from .model import EvaderSpec, Graph, InvalidInstanceError, ProblemInstance, build_evader_transition
from .solvers import Solution
from .transforms import NodeProblem, TransformMap

__all__ = ["INSTANCE_SCHEMA", "instance_to_dict", "instance_from_dict", "dumps_instance", "write_instance",
           "read_instance", "read_instance_file", "write_solution", "read_solution"]

FORMAT = "ume-instance"
VERSION = 1

_number = {"type": "number"}
_count = {"type": "integer", "minimum": 0}

INSTANCE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["format", "version", "nodes", "edges", "evaders", "budget"],
    "properties": {
        "format": {"const": FORMAT},
        "version": {"const": VERSION},
        "interdiction": {"enum": ["edge", "node"]},
        "nodes": {"type": "array", "items": _count},
        "edges": {
            "type": "array",
            "items": {"type": "array", "prefixItems": [_count, _count, _count, _number, _number],
                      "minItems": 5, "maxItems": 5},
        },
        "node_efficiency": {"type": "array", "items": _number},
        "evaders": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["weight", "target", "source"],
                "properties": {
                    "weight": _number,
                    "target": _count,
                    "source": {"type": "object", "patternProperties": {"^[0-9]+$": _number},
                               "additionalProperties": False},
                    "matrix": {"type": "array",
                               "items": {"type": "array",
                                         "prefixItems": [_count, _count, _number],
                                         "minItems": 3, "maxItems": 3}},
                    "model": {"type": "object", "required": ["lambda"],
                              "properties": {"lambda": {"type": "number", "exclusiveMinimum": 0}}},
                },
                "oneOf": [{"required": ["matrix"]}, {"required": ["model"]}],
            },
        },
        "budget": _count,
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "transform": {"type": "object"},
        "meta": {"type": "object"},
    },
}


def _graph_to_list(g: Graph):
    return [[e, int(g.tails[e]), int(g.heads[e]), float(g.costs[e]), float(g.efficiency[e])]
            for e in range(g.n_edges)]


def _evader_to_dict(ev: EvaderSpec, explicit: bool) -> dict:
    d = {
        "weight": ev.weight,
        "target": ev.target,
        "source": {str(i): float(ev.source[i]) for i in np.flatnonzero(ev.source)},
    }
    if ev.model_lambda is not None and not explicit:
        d["model"] = {"lambda": ev.model_lambda}
    else:
        coo = ev.matrix.tocoo()
        d["matrix"] = [[int(i), int(j), float(v)] for i, j, v in zip(coo.row, coo.col, coo.data)]
    return d


def instance_to_dict(problem, *, explicit_matrices: bool = False, transform: TransformMap | None = None,
                     meta: dict | None = None) -> dict:
    node = isinstance(problem, NodeProblem)
    g = problem.graph
    d = {
        "format": FORMAT,
        "version": VERSION,
        "interdiction": "node" if node else "edge",
        "nodes": list(range(g.n_nodes)),
        "edges": _graph_to_list(g),
        "evaders": [_evader_to_dict(ev, explicit_matrices) for ev in problem.evaders],
        "budget": int(problem.budget),
        "tolerance": float(problem.tolerance),
    }
    if node:
        d["node_efficiency"] = [float(x) for x in problem.node_efficiency]
    if transform is not None:
        d["transform"] = transform.to_dict()
    if meta:
        d["meta"] = meta
    return d


def instance_from_dict(d: dict):
    """Return ``(problem, transform_or_None)``; problem is edge or node flavoured."""
    try:
        jsonschema.validate(d, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidInstanceError(f"schema error at {where}: {exc.message}") from None
    n = len(d["nodes"])
    if sorted(d["nodes"]) != list(range(n)):
        raise InvalidInstanceError("node ids must be exactly 0..n-1")
    edges = sorted(d["edges"], key=lambda row: row[0])
    if [row[0] for row in edges] != list(range(len(edges))):
        raise InvalidInstanceError("edge ids must be exactly 0..|E|-1")
    g = Graph(n, np.array([row[1] for row in edges], dtype=np.int64),
              np.array([row[2] for row in edges], dtype=np.int64),
              np.array([float(row[3]) for row in edges]), np.array([float(row[4]) for row in edges]))
    evaders = []
    for k, ed in enumerate(d["evaders"]):
        a = np.zeros(n)
        for key, val in ed["source"].items():
            i = int(key)
            if i >= n:
                raise InvalidInstanceError(f"evader {k}: source node {i} out of range")
            a[i] = val
        t = ed["target"]
        if t >= n:
            raise InvalidInstanceError(f"evader {k}: target {t} out of range")
        if "model" in ed:
            lam = float(ed["model"]["lambda"])
            M = build_evader_transition(g, t, lam)
        else:
            lam = None
            trip = ed["matrix"]
            if any(i >= n or j >= n for i, j, _ in trip):
                raise InvalidInstanceError(f"evader {k}: matrix index out of range")
            M = sp.csr_matrix(([float(v) for _, _, v in trip],
                               ([i for i, _, _ in trip], [j for _, j, _ in trip])), shape=(n, n))
        evaders.append(EvaderSpec(float(ed["weight"]), a, t, M, model_lambda=lam))
    tol = float(d.get("tolerance", 1e-9))
    if d.get("interdiction", "edge") == "node":
        if "node_efficiency" not in d:
            raise InvalidInstanceError("node problems need node_efficiency")
        problem = NodeProblem(g, np.array(d["node_efficiency"], dtype=float), tuple(evaders),
                              d["budget"], tol)
    else:
        problem = ProblemInstance(g, tuple(evaders), d["budget"], tol)
    transform = TransformMap.from_dict(d["transform"]) if "transform" in d else None
    return problem, transform


def dumps_instance(d: dict) -> str:
    """One top-level key per line, one edge or evader per line."""
    parts = []
    for key, value in d.items():
        if key in ("edges", "evaders") and value:
            body = ",\n  ".join(json.dumps(v) for v in value)
            parts.append(f"{json.dumps(key)}: [\n  {body}\n ]")
        else:
            parts.append(f"{json.dumps(key)}: {json.dumps(value)}")
    return "{\n " + ",\n ".join(parts) + "\n}\n"


def write_instance(path, problem, **kwargs) -> None:
    Path(path).write_text(dumps_instance(instance_to_dict(problem, **kwargs)))


def read_instance_file(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInstanceError(f"{path}: not valid JSON ({exc})") from None
    return instance_from_dict(data)


def read_instance(path) -> ProblemInstance:
    problem, _ = read_instance_file(path)
    if not isinstance(problem, ProblemInstance):
        raise InvalidInstanceError(f"{path} holds a node-interdiction problem")
    return problem


def write_solution(path, solution: Solution, **extra) -> None:
    d = solution.to_dict()
    d.update(extra)
    Path(path).write_text(json.dumps(d, indent=1) + "\n")


def read_solution(path) -> Solution:
    return Solution.from_dict(json.loads(Path(path).read_text()))
