"""The natural LP of the Poisson arrival model, solved by row generation.

The LP has one constraint per (offline vertex, subset of types):

    sum_{i in S} x_ij <= 1 - exp(-sum_{i in S} lambda_i)

which is exponentially many.  For a fixed offline vertex the most violated
subset is always a prefix of the types sorted by x_ij / lambda_i, so the
restricted LP is grown by the most violated prefix of each vertex per round,
re-optimised from the previous basis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .instance import Instance
from .lp import LPError, SimplexLP, solve_lp

MAX_ROUNDS = 1000
LN2 = math.log(2.0)


@dataclass
class FractionalSolution:
    x: dict[tuple[str, str], float]
    x_j: dict[str, float]
    x_islack: dict[str, float]
    objective: float
    rounds: int = 0
    constraints: int = 0

    def get(self, type_id: str, offline_id: str) -> float:
        return self.x.get((type_id, offline_id), 0.0)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "x": {f"{i}:{j}": v for (i, j), v in sorted(self.x.items())},
            "x_j": dict(sorted(self.x_j.items())),
            "x_islack": dict(sorted(self.x_islack.items())),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


@dataclass
class SeparationResult:
    offline_id: str
    subset: list[str]
    lhs: float
    rhs: float
    violation: float


@dataclass
class FeasibilityReport:
    max_violation: float
    where: str
    tol: float
    details: list[tuple[str, float]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.max_violation <= self.tol


def _one_minus_exp(total_rate: float) -> float:
    return -math.expm1(-total_rate)


def _sorted_types(inst: Instance, x: Mapping[tuple[str, str], float], j: str):
    """Types ordered by x_ij / lambda_i descending, ties by type-id ascending."""
    rows = [(t.id, t.rate, float(x.get((t.id, j), 0.0))) for t in inst.types]
    rows.sort(key=lambda r: (-r[2] / r[1], r[0]))
    return rows


def prefix_values(inst: Instance, x, j: str) -> list[SeparationResult]:
    """Evaluate the constraint for every prefix of the sorted type order."""
    out = []
    members: list[str] = []
    lhs_terms: list[float] = []
    rate_terms: list[float] = []
    for tid, rate, xij in _sorted_types(inst, x, j):
        members.append(tid)
        lhs_terms.append(xij)
        rate_terms.append(rate)
        lhs = math.fsum(lhs_terms)
        rhs = _one_minus_exp(math.fsum(rate_terms))
        out.append(SeparationResult(j, list(members), lhs, rhs, lhs - rhs))
    return out


def separation_oracle(inst: Instance, x: Mapping[tuple[str, str], float], j: str) -> SeparationResult:
    """Most violated subset constraint for offline vertex ``j``.

    The scan over prefixes of the sorted order finds the maximum of
    ``sum_S x_ij - 1 + exp(-lambda(S))`` over all subsets S including the
    empty one.  When that maximum is the empty set (every nonempty prefix has
    negative value), the best nonempty subset need not be a prefix; it is
    then found exactly by forcing each type in turn and scanning prefixes of
    the remaining order, which costs O(|I|^2) and only happens for vertices
    that are already feasible.
    """
    if j not in set(inst.offline_ids):
        raise KeyError(f"unknown offline vertex {j!r}")
    prefixes = prefix_values(inst, x, j)
    best = max(prefixes, key=lambda r: r.violation)
    if best.violation >= 0:
        return best

    order = _sorted_types(inst, x, j)
    for pos, (tid, rate, xij) in enumerate(order):
        members = [tid]
        lhs_terms, rate_terms = [xij], [rate]
        cand = SeparationResult(j, [tid], xij, _one_minus_exp(rate), xij - _one_minus_exp(rate))
        if cand.violation > best.violation:
            best = cand
        for other, orate, oxij in order[:pos] + order[pos + 1:]:
            members.append(other)
            lhs_terms.append(oxij)
            rate_terms.append(orate)
            lhs = math.fsum(lhs_terms)
            rhs = _one_minus_exp(math.fsum(rate_terms))
            if lhs - rhs > best.violation:
                best = SeparationResult(j, list(members), lhs, rhs, lhs - rhs)
    return best


def check_feasible_natural(inst: Instance, x: Mapping[tuple[str, str], float],
                           tol: float = 1e-8) -> FeasibilityReport:
    """Largest violation (lhs - rhs) over every constraint of the natural LP."""
    details = []
    for (i, j), v in x.items():
        details.append((f"x[{i},{j}] >= 0", -float(v)))
    for t in inst.types:
        total = math.fsum(float(x.get((t.id, j), 0.0)) for j in inst.offline_ids)
        details.append((f"capacity of type {t.id}", total - t.rate))
    for j in inst.offline_ids:
        res = separation_oracle(inst, x, j)
        details.append((f"offline {j} subset {res.subset}", res.violation))
    if not details:
        return FeasibilityReport(0.0, "", tol, [])
    where, worst = max(details, key=lambda d: d[1])
    return FeasibilityReport(worst, where, tol, details)


# -- solvers ----------------------------------------------------------------

def _edges(inst: Instance):
    edges = [(t.id, j) for t in inst.types for j in t.edges]
    index = {e: n for n, e in enumerate(edges)}
    weights = np.array([inst.type_by_id(i).edges[j] for i, j in edges], dtype=float)
    return edges, index, weights


def _package(inst: Instance, edges, values, objective_weights, rounds=0, constraints=0):
    x = {}
    for e, v in zip(edges, values):
        x[e] = 0.0 if v < 1e-12 else float(v)
    x_j = {j: 0.0 for j in inst.offline_ids}
    per_type = {t.id: [] for t in inst.types}
    per_offline = {j: [] for j in inst.offline_ids}
    for (i, j), v in x.items():
        per_type[i].append(v)
        per_offline[j].append(v)
    x_j = {j: math.fsum(v) for j, v in per_offline.items()}
    slack = {t.id: t.rate - math.fsum(per_type[t.id]) for t in inst.types}
    objective = math.fsum(w * x[e] for e, w in zip(edges, objective_weights))
    return FractionalSolution(x, x_j, slack, objective, rounds, constraints)


def solve_natural(inst: Instance, tol: float = 1e-9, max_rounds: int = MAX_ROUNDS) -> FractionalSolution:
    """Optimal solution of the natural LP, feasible to within ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    edges, index, weights = _edges(inst)
    if not edges:
        return _package(inst, edges, [], weights)

    rows: list[np.ndarray] = []
    rhs: list[float] = []
    nvar = len(edges)

    def add_row(pairs, bound):
        row = np.zeros(nvar)
        for e in pairs:
            if e in index:
                row[index[e]] = 1.0
        rows.append(row)
        rhs.append(bound)

    for t in inst.types:
        add_row([(t.id, j) for j in t.edges], t.rate)
    full_rate = inst.total_rate
    seen: set[tuple[str, frozenset]] = set()
    for j in inst.offline_ids:
        nbrs = [t for t in inst.types if j in t.edges]
        for t in nbrs:
            add_row([(t.id, j)], _one_minus_exp(t.rate))
            seen.add((j, frozenset([t.id])))
        if nbrs:
            add_row([(t.id, j) for t in nbrs], _one_minus_exp(full_rate))
            seen.add((j, frozenset(inst.type_ids)))

    lp = SimplexLP(weights, np.vstack(rows), np.array(rhs))
    for rnd in range(1, max_rounds + 1):
        res = lp.solve()
        x = dict(zip(edges, res.x))
        rows, rhs = [], []
        for j in inst.offline_ids:
            cand = separation_oracle(inst, x, j)
            key = (j, frozenset(cand.subset))
            if cand.violation > tol and key not in seen:
                seen.add(key)
                add_row([(i, j) for i in cand.subset], cand.rhs)
        if not rows:
            worst = max(separation_oracle(inst, x, j).violation for j in inst.offline_ids)
            if worst > tol:
                raise LPError(f"violated constraint {worst:.3g} already in the restricted LP")
            return _package(inst, edges, res.x, weights, rnd, lp.m)
        lp.add_rows(np.vstack(rows), np.array(rhs))
    raise LPError(f"row generation did not converge in {max_rounds} rounds")


def solve_jaillet_lu(inst: Instance) -> FractionalSolution:
    """Solve the general-rates comparison LP with one fewer family of constraints.

    Its per-vertex constraint sum_i (2 x_ij - lambda_i)^+ <= 1 - ln 2 is
    linearised with y_ij >= 2 x_ij - lambda_i, y_ij >= 0, sum_i y_ij <= 1 - ln 2.
    """
    edges, index, weights = _edges(inst)
    if not edges:
        return _package(inst, edges, [], weights)
    nx = len(edges)
    rows, rhs = [], []
    for t in inst.types:
        row = np.zeros(2 * nx)
        for j in t.edges:
            row[index[(t.id, j)]] = 1.0
        rows.append(row)
        rhs.append(t.rate)
    for j in inst.offline_ids:
        cols = [index[(t.id, j)] for t in inst.types if j in t.edges]
        if not cols:
            continue
        row = np.zeros(2 * nx)
        row[cols] = 1.0
        rows.append(row)
        rhs.append(1.0)
        row = np.zeros(2 * nx)
        row[[nx + c for c in cols]] = 1.0
        rows.append(row)
        rhs.append(1.0 - LN2)
    for (i, j), c in index.items():
        row = np.zeros(2 * nx)
        row[c] = 2.0
        row[nx + c] = -1.0
        rows.append(row)
        rhs.append(inst.type_by_id(i).rate)
    cost = np.concatenate([weights, np.zeros(nx)])
    res = solve_lp(cost, np.vstack(rows), np.array(rhs))
    return _package(inst, edges, res.x[:nx], weights, 1, len(rows))
