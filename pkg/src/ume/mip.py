"""Mixed-integer program for the interdiction problem, in CPLEX-LP text.

For each evader k the program carries visit variables ``pi_k{k}_n{i}`` and
edge flow variables ``th_k{k}_e{e}``; ``r_e{e}`` are the binary
interdiction decisions.  The objective minimises the weighted probability
of reaching the targets, which is one minus the capture probability.

    flow_k{k}_n{i}:  pi_i - sum_{e into i} th_e = a_i
    doma_k{k}_e{e}:  th_e - M_e pi_tail + M_e d_e r_e >= 0
    domb_k{k}_e{e}:  th_e - M_e (1 - d_e) pi_tail    >= 0
    budget:          sum_e r_e = B      (or <= B)
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import (
    InvalidInstanceError,
    ProblemInstance,
    apply_interdiction,
    expected_visits,
    objective,
)

__all__ = ["Constraint", "MipModel", "MipCheck", "build_mip", "export_mip", "write_lp",
           "parse_lp", "check_mip_solution"]

_TERMS_PER_LINE = 6


@dataclass
class Constraint:
    name: str
    coeffs: dict
    sense: str
    rhs: float


@dataclass
class MipModel:
    objective: dict
    constraints: list
    upper_bounds: dict = field(default_factory=dict)
    binaries: list = field(default_factory=list)

    def variables(self) -> list:
        seen = dict.fromkeys(self.objective)
        for c in self.constraints:
            seen.update(dict.fromkeys(c.coeffs))
        seen.update(dict.fromkeys(self.upper_bounds))
        seen.update(dict.fromkeys(self.binaries))
        return list(seen)

    def coefficient_matrix(self):
        """``(row names, column names, csr matrix)`` with columns sorted by name."""
        cols = sorted(self.variables())
        col_of = {v: k for k, v in enumerate(cols)}
        rows, cidx, vals = [], [], []
        for r, c in enumerate(self.constraints):
            for v, a in c.coeffs.items():
                rows.append(r)
                cidx.append(col_of[v])
                vals.append(a)
        A = sp.csr_matrix((vals, (rows, cidx)), shape=(len(self.constraints), len(cols)))
        return [c.name for c in self.constraints], cols, A

    def counts(self) -> dict:
        prefix = lambda p: sum(1 for v in self.variables() if v.startswith(p))  # noqa: E731
        kinds = lambda p: sum(1 for c in self.constraints if c.name.startswith(p))  # noqa: E731
        return {
            "binaries": len(self.binaries),
            "pi": prefix("pi_"),
            "theta": prefix("th_"),
            "flow": kinds("flow_"),
            "dominance": kinds("doma_") + kinds("domb_"),
            "budget": kinds("budget"),
        }


def _add(coeffs, var, value):
    if value != 0:
        coeffs[var] = coeffs.get(var, 0.0) + value


def build_mip(problem: ProblemInstance, *, budget_equality: bool = True,
              pi_upper_bounds: bool = False) -> MipModel:
    g = problem.graph
    E = g.n_edges
    r = [f"r_e{e}" for e in range(E)]
    obj = {}
    cons = []
    ub = {}
    into = [[] for _ in range(g.n_nodes)]
    for e, j in enumerate(g.heads.tolist()):
        into[j].append(e)
    for k, ev in enumerate(problem.evaders):
        pi = [f"pi_k{k}_n{i}" for i in range(g.n_nodes)]
        th = [f"th_k{k}_e{e}" for e in range(E)]
        _add(obj, pi[ev.target], ev.weight)
        for i in range(g.n_nodes):
            coeffs = {pi[i]: 1.0}
            for e in into[i]:
                _add(coeffs, th[e], -1.0)
            cons.append(Constraint(f"flow_k{k}_n{i}", coeffs, "=", float(ev.source[i])))
        m = np.asarray(ev.matrix[g.tails, g.heads]).ravel() if E else np.zeros(0)
        for e in range(E):
            tail = int(g.tails[e])
            M, d = float(m[e]), float(g.efficiency[e])
            a = {th[e]: 1.0}
            _add(a, pi[tail], -M)
            _add(a, r[e], M * d)
            b = {th[e]: 1.0}
            _add(b, pi[tail], -(M * (1.0 - d)))
            cons.append(Constraint(f"doma_k{k}_e{e}", a, ">=", 0.0))
            cons.append(Constraint(f"domb_k{k}_e{e}", b, ">=", 0.0))
        if pi_upper_bounds:
            ub.update(dict.fromkeys(pi, 1.0))
    cons.append(Constraint("budget", {v: 1.0 for v in r}, "=" if budget_equality else "<=",
                           float(problem.budget)))
    return MipModel(obj, cons, ub, r)


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _expr(coeffs: dict) -> list:
    terms = []
    for k, (v, a) in enumerate(coeffs.items()):
        sign = "-" if a < 0 else "+"
        mag = "" if abs(a) == 1.0 else _num(abs(a)) + " "
        if k == 0:
            terms.append(f"{'-' if a < 0 else ''}{mag}{v}")
        else:
            terms.append(f"{sign} {mag}{v}")
    return terms


def _wrap(head: str, tokens: list) -> list:
    lines = []
    for k in range(0, max(len(tokens), 1), _TERMS_PER_LINE):
        chunk = " ".join(tokens[k:k + _TERMS_PER_LINE])
        lines.append((head if k == 0 else "   ") + chunk)
    return lines


def write_lp(model: MipModel, title: str = "UME interdiction") -> str:
    out = [f"\\ {title}", "Minimize"]
    out += _wrap(" obj: ", _expr(model.objective))
    out.append("Subject To")
    for c in model.constraints:
        op = {"=": "=", ">=": ">=", "<=": "<="}[c.sense]
        out += _wrap(f" {c.name}: ", _expr(c.coeffs) + [op, _num(c.rhs)])
    if model.upper_bounds:
        out.append("Bounds")
        out += [f" 0 <= {v} <= {_num(u)}" for v, u in model.upper_bounds.items()]
    if model.binaries:
        out.append("Binaries")
        for k in range(0, len(model.binaries), 10):
            out.append(" " + " ".join(model.binaries[k:k + 10]))
    out.append("End")
    return "\n".join(out) + "\n"


def export_mip(problem: ProblemInstance, *, budget_equality: bool = True,
               pi_upper_bounds: bool = False) -> str:
    return write_lp(build_mip(problem, budget_equality=budget_equality,
                              pi_upper_bounds=pi_upper_bounds))


_SECTIONS = {
    "minimize": "obj", "minimum": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "end": "end",
}
_TOKEN = re.compile(r"[<>=]=?|[+-]|[A-Za-z_][\w.\[\]]*:|[0-9.]+(?:[eE][+-]?\d+)?|[A-Za-z_][\w.\[\]]*")


def _parse_linear(tokens):
    coeffs = {}
    sign, mag = 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
        elif tok[0].isdigit() or tok[0] == ".":
            mag = float(tok)
        else:
            coeffs[tok] = coeffs.get(tok, 0.0) + sign * (1.0 if mag is None else mag)
            sign, mag = 1.0, None
    return coeffs


def parse_lp(text: str) -> MipModel:
    """Parse the LP subset written by :func:`write_lp`."""
    blocks = {"obj": [], "st": [], "bounds": [], "bin": []}
    section = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            continue
        if section is None:
            raise InvalidInstanceError(f"LP text outside any section: {raw!r}")
        blocks[section].append(line)

    obj_tokens = _TOKEN.findall(" ".join(blocks["obj"]))
    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    model = MipModel(_parse_linear(obj_tokens), [])

    tokens = _TOKEN.findall(" ".join(blocks["st"]))
    k = 0
    while k < len(tokens):
        if not tokens[k].endswith(":"):
            raise InvalidInstanceError(f"unnamed constraint near {tokens[k:k + 5]}")
        name = tokens[k][:-1]
        k += 1
        body = []
        while tokens[k] not in ("=", "<=", ">=", "<", ">", "=<", "=>"):
            body.append(tokens[k])
            k += 1
        sense = {"<": "<=", ">": ">=", "=<": "<=", "=>": ">="}.get(tokens[k], tokens[k])
        k += 1
        sign = 1.0
        if tokens[k] in "+-":
            sign = -1.0 if tokens[k] == "-" else 1.0
            k += 1
        model.constraints.append(Constraint(name, _parse_linear(body), sense, sign * float(tokens[k])))
        k += 1

    for line in blocks["bounds"]:
        m = re.fullmatch(r"0\s*<=\s*(\S+)\s*<=\s*(\S+)", line)
        if not m:
            raise InvalidInstanceError(f"unsupported bound line {line!r}")
        model.upper_bounds[m.group(1)] = float(m.group(2))
    for line in blocks["bin"]:
        model.binaries.extend(line.split())
    return model


@dataclass
class MipCheck:
    passed: bool
    H: float
    J: float
    max_violation: float
    violations: list
    pi: list
    theta: list


def check_mip_solution(problem: ProblemInstance, r, tolerance: float = 1e-8, *,
                       budget_equality: bool = True, pi_upper_bounds: bool = False) -> MipCheck:
    """Plug the core-model solution for indicator ``r`` into the exported program.

    ``pi`` comes from the interdicted linear system and
    ``theta_e = max(M pi_tail - M d r, M (1 - d) pi_tail)``.  Every
    constraint and bound is checked, and so is ``H = 1 - J``.
    """
    g = problem.graph
    r = np.asarray(r, dtype=float).reshape(-1)
    if len(r) != g.n_edges or not np.all((r == 0) | (r == 1)):
        raise InvalidInstanceError("r must be a 0/1 vector with one entry per edge")
    used = int(r.sum())
    if (used != problem.budget) if budget_equality else (used > problem.budget):
        raise InvalidInstanceError(f"indicator uses {used} edges, budget is {problem.budget}")
    S = tuple(int(e) for e in np.flatnonzero(r))
    values = {f"r_e{e}": float(r[e]) for e in range(g.n_edges)}
    pis, thetas = [], []
    H = 0.0
    for k, ev in enumerate(problem.evaders):
        pi = expected_visits(ev.source, apply_interdiction(ev.matrix, S, g), problem.tolerance)
        m = np.asarray(ev.matrix[g.tails, g.heads]).ravel() if g.n_edges else np.zeros(0)
        p_tail = pi[g.tails]
        theta = np.maximum(m * p_tail - m * g.efficiency * r, m * (1.0 - g.efficiency) * p_tail)
        values.update({f"pi_k{k}_n{i}": float(v) for i, v in enumerate(pi)})
        values.update({f"th_k{k}_e{e}": float(v) for e, v in enumerate(theta)})
        H += ev.weight * float(pi[ev.target])
        pis.append(pi)
        thetas.append(theta)

    model = build_mip(problem, budget_equality=budget_equality, pi_upper_bounds=pi_upper_bounds)
    violations = []
    for c in model.constraints:
        lhs = math.fsum(a * values[v] for v, a in c.coeffs.items())
        gap = {"=": abs(lhs - c.rhs), ">=": c.rhs - lhs, "<=": lhs - c.rhs}[c.sense]
        if gap > tolerance:
            violations.append((c.name, lhs, c.sense, c.rhs, gap))
    for v, x in values.items():
        if x < -tolerance:
            violations.append((v, x, ">=", 0.0, -x))
        if v in model.upper_bounds and x > model.upper_bounds[v] + tolerance:
            violations.append((v, x, "<=", model.upper_bounds[v], x - model.upper_bounds[v]))
    J = objective(problem, S)
    consistency = abs(H - (1.0 - J))
    if consistency > 1e-8:
        violations.append(("H+J=1", H + J, "=", 1.0, consistency))
    worst = max((v[-1] for v in violations), default=0.0)
    return MipCheck(not violations, H, J, worst, violations, pis, thetas)
