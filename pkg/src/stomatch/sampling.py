"""Pair distributions over J* x J* (J* = offline vertices plus the dummy BOT)
and the arrival-rate tables mu derived from them.

Four builders turn an LP solution into one distribution per online type:

* wasteful   - intervals of length x_ij laid around a circle of length
               lambda_i; the pair is (interval of nu, interval of nu + lambda_i/2).
* beta       - the dominant vertex j* of a wasteful type hands part of its
               self-pair mass to the other options, scaled by beta >= 1.
* limit      - beta -> infinity in closed form: no self-pair mass at all.
* amortized  - the wasteful pair with the first entry j replaced by BOT with
               probability delta(x_j).
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import BETA_DROP, delta, kappa
from .certificates import C_LIMIT
from .instance import BOT, Instance
from .natural_lp import FractionalSolution, check_feasible_natural

WASTEFUL, BETA, LIMIT, AMORTIZED = "wasteful", "beta", "limit", "amortized"
KINDS = (WASTEFUL, BETA, LIMIT, AMORTIZED)

Pair = tuple[str, str]


class InfeasibleSolution(ValueError):
    pass


@dataclass(frozen=True)
class PairDistribution:
    type_id: str
    support: tuple[tuple[Pair, float], ...]

    def as_dict(self) -> dict[Pair, float]:
        return dict(self.support)

    def prob(self, j: str, k: str) -> float:
        return self.as_dict().get((j, k), 0.0)

    def first_marginal(self) -> dict[str, float]:
        out: dict[str, list[float]] = defaultdict(list)
        for (j, _), p in self.support:
            out[j].append(p)
        return {j: math.fsum(v) for j, v in out.items()}

    def second_marginal(self) -> dict[str, float]:
        out: dict[str, list[float]] = defaultdict(list)
        for (_, k), p in self.support:
            out[k].append(p)
        return {k: math.fsum(v) for k, v in out.items()}


def _make_dist(type_id: str, masses: dict[Pair, float]) -> PairDistribution:
    items = sorted((pair, float(p)) for pair, p in masses.items() if p > 0.0)
    return PairDistribution(type_id, tuple(items))


@dataclass
class RateTable:
    mu_jk: dict[Pair, float]
    mu_j: dict[str, float]
    mu_perp_j: dict[str, float]
    mu_out: dict[str, float]

    def get(self, j: str, k: str) -> float:
        return self.mu_jk.get((j, k), 0.0)

    def in_mass(self, j: str) -> float:
        """Sum over k in J* other than j of mu_kj."""
        return math.fsum(v for (a, b), v in self.mu_jk.items() if b == j and a != j)

    def total(self) -> float:
        return math.fsum(self.mu_jk.values())

    def to_dict(self) -> dict:
        return {
            "mu_jk": {f"{j}:{k}": v for (j, k), v in sorted(self.mu_jk.items())},
            "mu_j": dict(sorted(self.mu_j.items())),
            "mu_perp_j": dict(sorted(self.mu_perp_j.items())),
            "mu_out": dict(sorted(self.mu_out.items())),
        }


@dataclass
class SamplingPlan:
    kind: str
    params: dict
    dists: dict[str, PairDistribution]
    rates: RateTable

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(sorted(self.params.items())),
            "types": {tid: [[j, k, p] for (j, k), p in d.support]
                      for tid, d in sorted(self.dists.items())},
            "rates": self.rates.to_dict(),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def rate_table(inst: Instance, dists: dict[str, PairDistribution]) -> RateTable:
    """mu_jk = sum_i lambda_i D_i(j, k) and the derived per-vertex sums."""
    terms: dict[Pair, list[float]] = defaultdict(list)
    for t in inst.types:
        if t.id not in dists:
            raise KeyError(f"no pair distribution for type {t.id!r}")
        for pair, p in dists[t.id].support:
            terms[pair].append(t.rate * p)
    mu_jk = {pair: math.fsum(v) for pair, v in terms.items()}
    first: dict[str, list[float]] = defaultdict(list)
    out: dict[str, list[float]] = defaultdict(list)
    for (j, k), v in mu_jk.items():
        first[j].append(v)
        if k != j:
            out[j].append(v)
    ids = inst.offline_ids
    return RateTable(
        mu_jk=mu_jk,
        mu_j={j: math.fsum(first[j]) for j in ids},
        mu_perp_j={j: mu_jk.get((BOT, j), 0.0) for j in ids},
        mu_out={j: math.fsum(out[j]) for j in ids},
    )


# -- builders -----------------------------------------------------------------

def _type_masses(inst: Instance, sol: FractionalSolution, tid: str) -> tuple[float, list[tuple[str, float]]]:
    """Circle length and the (vertex, length) layout in offline-id order, BOT last."""
    t = inst.type_by_id(tid)
    layout = [(j, sol.get(tid, j)) for j in sorted(t.edges)]
    layout = [(j, x) for j, x in layout if x > 0.0]
    used = math.fsum(x for _, x in layout)
    slack = max(t.rate - used, 0.0)
    if slack > 0.0:
        layout.append((BOT, slack))
    return used + slack, layout


def _check_solution(inst: Instance, sol: FractionalSolution, tol: float = 1e-8) -> None:
    for (i, j), v in sol.x.items():
        if v < -1e-12:
            raise InfeasibleSolution(f"x[{i},{j}] = {v} is negative")
    report = check_feasible_natural(inst, sol.x, tol)
    if not report.feasible:
        raise InfeasibleSolution(
            f"solution violates the natural LP by {report.max_violation:.3g} at {report.where}")


def _wasteful_pmf(length: float, layout: list[tuple[str, float]]) -> dict[Pair, float]:
    """Overlap measure of each I_j with the half-circle shift of each I_k."""
    if len(layout) == 1:
        return {(layout[0][0], layout[0][0]): 1.0}
    starts, ends, names = [], [], []
    pos = 0.0
    for name, x in layout:
        starts.append(pos)
        pos += x
        ends.append(pos)
        names.append(name)
    ends[-1] = length
    half = length / 2.0
    cuts = set(starts) | {length}
    cuts |= {(s - half) % length for s in starts}
    cuts = sorted(c for c in cuts if 0.0 <= c <= length)
    if cuts[0] != 0.0:
        cuts.insert(0, 0.0)
    ends_arr = np.asarray(ends)

    def owner(point: float) -> str:
        return names[min(int(np.searchsorted(ends_arr, point, side="right")), len(names) - 1)]

    masses: dict[Pair, list[float]] = defaultdict(list)
    for a, b in zip(cuts, cuts[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        masses[(owner(mid), owner((mid + half) % length))].append(b - a)
    return {pair: math.fsum(v) / length for pair, v in masses.items()}


def _dominant(length: float, layout) -> tuple[str, float] | None:
    for name, x in layout:
        if x > length / 2.0:
            return name, x
    return None


def _reallocated_pmf(length: float, layout, scale: float | None) -> dict[Pair, float]:
    """Wasteful pmf of a type with dominant j*, with the self-pair of j*
    spread over the other options by ``min(scale, x*/(length - x*))``
    (``scale=None`` means the full amount)."""
    star, xs = _dominant(length, layout)
    rest = [(name, x) for name, x in layout if name != star]
    rest_total = math.fsum(x for _, x in rest)
    p_star = xs / length
    masses: dict[Pair, float] = {}
    for name, x in rest:
        masses[(name, star)] = x / length
    if rest_total <= 0.0:
        masses[(star, star)] = 1.0
        return masses
    full = xs / rest_total
    m = full if scale is None else min(scale, full)
    moved = []
    for name, x in rest:
        # (x_k / x*) * m of the j*-first mass, written as p* * (x_k/rest_total) * (m/full)
        p = p_star * (x / rest_total) * (m / full)
        masses[(star, name)] = p
        moved.append(p)
    residual = p_star - math.fsum(moved)
    if scale is not None and residual > 0.0 and m < full:
        masses[(star, star)] = residual
    return masses


def build_wasteful(inst: Instance, sol: FractionalSolution, check: bool = True) -> SamplingPlan:
    if check:
        _check_solution(inst, sol)
    dists = {}
    for t in inst.types:
        length, layout = _type_masses(inst, sol, t.id)
        dists[t.id] = _make_dist(t.id, _wasteful_pmf(length, layout))
    return SamplingPlan(WASTEFUL, {}, dists, rate_table(inst, dists))


def _build_dominant(inst, sol, scale, kind, params, check) -> SamplingPlan:
    if check:
        _check_solution(inst, sol)
    dists = {}
    for t in inst.types:
        length, layout = _type_masses(inst, sol, t.id)
        if _dominant(length, layout) is None:
            pmf = _wasteful_pmf(length, layout)
        else:
            pmf = _reallocated_pmf(length, layout, scale)
        dists[t.id] = _make_dist(t.id, pmf)
    return SamplingPlan(kind, params, dists, rate_table(inst, dists))


def build_beta(inst: Instance, sol: FractionalSolution, beta: float, check: bool = True) -> SamplingPlan:
    if not beta >= 1.0:
        raise ValueError(f"beta must be >= 1, got {beta}")
    return _build_dominant(inst, sol, float(beta), BETA, {"beta": float(beta)}, check)


def build_limit(inst: Instance, sol: FractionalSolution, check: bool = True) -> SamplingPlan:
    return _build_dominant(inst, sol, None, LIMIT, {}, check)


def build_amortized(inst: Instance, sol: FractionalSolution, beta_drop: float = BETA_DROP,
                    check: bool = True) -> SamplingPlan:
    if not 0.0 <= beta_drop < 0.5:
        raise ValueError(f"beta_drop must lie in [0, 1/2), got {beta_drop}")
    base = build_wasteful(inst, sol, check)
    drop = {j: float(delta(min(max(sol.x_j.get(j, 0.0), 0.0), 1.0), beta_drop))
            for j in inst.offline_ids}
    dists = {}
    for tid, dist in base.dists.items():
        masses: dict[Pair, list[float]] = defaultdict(list)
        for (j, k), p in dist.support:
            d = drop.get(j, 0.0)
            if j == BOT or d == 0.0:
                masses[(j, k)].append(p)
            else:
                masses[(j, k)].append((1.0 - d) * p)
                masses[(BOT, k)].append(d * p)
        dists[tid] = _make_dist(tid, {pair: math.fsum(v) for pair, v in masses.items()})
    return SamplingPlan(AMORTIZED, {"beta_drop": float(beta_drop)}, dists, rate_table(inst, dists))


def build_plan(inst: Instance, sol: FractionalSolution, kind: str, beta: float = 1.0,
               beta_drop: float = BETA_DROP, check: bool = True) -> SamplingPlan:
    if kind == WASTEFUL:
        return build_wasteful(inst, sol, check)
    if kind == BETA:
        return build_beta(inst, sol, beta, check)
    if kind == LIMIT:
        return build_limit(inst, sol, check)
    if kind == AMORTIZED:
        return build_amortized(inst, sol, beta_drop, check)
    raise ValueError(f"unknown plan kind {kind!r}; expected one of {KINDS}")


def pmf_distance(a: SamplingPlan, b: SamplingPlan) -> float:
    """Largest absolute pmf difference over all types and pairs."""
    worst = 0.0
    for tid in a.dists.keys() | b.dists.keys():
        da, db = a.dists[tid].as_dict(), b.dists[tid].as_dict()
        for pair in da.keys() | db.keys():
            worst = max(worst, abs(da.get(pair, 0.0) - db.get(pair, 0.0)))
    return worst


# -- property checks ------------------------------------------------------------

@dataclass
class PlanReport:
    kind: str
    tol: float
    checked: int = 0
    failures: list[tuple[str, str, float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def eq(self, name: str, where: str, lhs: float, rhs: float) -> None:
        self.checked += 1
        if abs(lhs - rhs) > self.tol * max(1.0, abs(rhs)):
            self.failures.append((name, where, lhs, rhs))

    def ge(self, name: str, where: str, lhs: float, rhs: float) -> None:
        self.checked += 1
        if lhs < rhs - self.tol:
            self.failures.append((name, where, lhs, rhs))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tol": self.tol, "checked": self.checked, "passed": self.passed,
                "failures": [{"property": p, "where": w, "lhs": a, "rhs": b}
                             for p, w, a, b in self.failures]}


def verify_plan_properties(inst: Instance, sol: FractionalSolution, plan: SamplingPlan,
                           tol: float = 1e-9) -> PlanReport:
    """Check the rate identities and inequalities that the ratio analysis uses."""
    rep = PlanReport(plan.kind, tol)
    drop = None
    if plan.kind == AMORTIZED:
        drop = {j: float(delta(min(sol.x_j.get(j, 0.0), 1.0), plan.params["beta_drop"]))
                for j in inst.offline_ids}

    # Per-type normalization and first-entry marginals.
    for t in inst.types:
        dist = plan.dists[t.id]
        rep.eq("pmf sums to 1", t.id, math.fsum(p for _, p in dist.support), 1.0)
        first = dist.first_marginal()
        for j in t.edges:
            expect = sol.get(t.id, j) / t.rate
            if drop is not None:
                expect *= 1.0 - drop[j]
            rep.eq("first-entry marginal", f"{t.id}->{j}", first.get(j, 0.0), expect)

    recomputed = rate_table(inst, plan.dists)
    rep.eq("total rate equals Lambda", "all", recomputed.total(), inst.total_rate)
    for pair in recomputed.mu_jk.keys() | plan.rates.mu_jk.keys():
        rep.eq("rate table consistent", ":".join(pair), plan.rates.get(*pair), recomputed.get(*pair))

    rates = plan.rates
    stars = inst.offline_ids + [BOT]
    if plan.kind == WASTEFUL:
        ref = rates
    else:
        ref = build_wasteful(inst, sol, check=False).rates

    for j in inst.offline_ids:
        x_j = min(max(sol.x_j.get(j, 0.0), 0.0), 1.0)
        if plan.kind == WASTEFUL:
            rep.eq("mu_j = x_j", j, rates.mu_j[j], sol.x_j.get(j, 0.0))
            rep.ge("in-mass <= 1", j, 1.0, rates.in_mass(j))
            rep.ge("mu_out >= kappa(1, x_j)", j, rates.mu_out[j], float(kappa(1.0, x_j)))
            for k in stars:
                if k != j:
                    rep.eq("mu_jk symmetric", f"{j}:{k}", rates.get(j, k), rates.get(k, j))
        elif plan.kind == BETA:
            beta = plan.params["beta"]
            rep.eq("mu_j = x_j", j, rates.mu_j[j], sol.x_j.get(j, 0.0))
            rep.ge("in-mass <= beta", j, beta, rates.in_mass(j))
            rep.ge("mu_out >= kappa(beta, x_j)", j, rates.mu_out[j], float(kappa(beta, x_j)))
            for k in stars:
                if k != j:
                    rep.ge("mu_jk <= beta mu_jk(1)", f"{j}:{k}", beta * ref.get(j, k), rates.get(j, k))
                    rep.ge("mu_kj <= beta mu_kj(1)", f"{k}:{j}", beta * ref.get(k, j), rates.get(k, j))
        elif plan.kind == LIMIT:
            rep.eq("mu_j = x_j", j, rates.mu_j[j], sol.x_j.get(j, 0.0))
            rep.eq("no self-pair mass", j, rates.get(j, j), 0.0)
            rep.ge("mu_out >= kappa(c, x_j)", j, rates.mu_out[j], float(kappa(C_LIMIT, x_j)))
            for k in stars:
                if k != j:
                    rep.ge("mu_jk >= mu_jk(1)", f"{j}:{k}", rates.get(j, k), ref.get(j, k))
                    rep.ge("mu_kj >= mu_kj(1)", f"{k}:{j}", rates.get(k, j), ref.get(k, j))
        else:
            d = drop[j]
            rep.eq("mu_j = (1 - delta) mu_j(1)", j, rates.mu_j[j], (1.0 - d) * ref.mu_j[j])
            for k in stars:
                rep.eq("mu_jk = (1 - delta) mu_jk(1)", f"{j}:{k}", rates.get(j, k),
                       (1.0 - d) * ref.get(j, k))
            # Pairs (j', j) led by any j' in J, including j' = j, move mass to (BOT, j).
            moved = math.fsum(drop[a] * ref.get(a, j) for a in inst.offline_ids)
            rep.eq("mu_bot_k = mu_bot_k(1) + moved mass", j, rates.mu_perp_j[j],
                   ref.mu_perp_j[j] + moved)
    return rep
