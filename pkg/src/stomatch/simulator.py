"""Arrival streams, the pair-sampling algorithm, offline optima and Monte Carlo studies.

Randomness comes from the counter-based generator in ``rng``: trial t draws
its arrivals from stream STREAM_ARRIVALS and its pair choices from
STREAM_ALGORITHM, both keyed by (seed, t).  The batch engine advances all
trials of a chunk one arrival position at a time with numpy; the scalar
``run_pair_sampling`` performs the same comparisons on one trial and is the
readable reference the batch engine is tested against.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import poisson

from .analysis import amortized_match_lower_bound, match_prob_lower_bound, poisson_tail
from .instance import BOT, Instance
from .matching import max_weight_matching
from .natural_lp import FractionalSolution, prefix_values, solve_natural
from .rng import STREAM_ALGORITHM, STREAM_ARRIVALS, STREAM_AUX, uniform_block, uniforms
from .sampling import AMORTIZED, SamplingPlan, build_wasteful

POISSON, FIXED = "poisson", "fixed"
MODELS = (POISSON, FIXED)
CHUNK = 8192
SIGMAS = 3.0


class ModelError(ValueError):
    pass


def integral_total_rate(inst: Instance) -> int:
    lam = inst.total_rate
    n = int(round(lam))
    if abs(lam - n) > 1e-9 or n < 1:
        raise ModelError(
            f"the fixed-count model needs an integer total rate Lambda >= 1, got {lam!r}")
    return n


def _stderr(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


def _threads(n_chunks: int) -> int:
    raw = os.environ.get("STOMATCH_THREADS", "0").strip() or "0"
    try:
        requested = int(raw)
    except ValueError as exc:
        raise ValueError(f"STOMATCH_THREADS must be an integer, got {raw!r}") from exc
    if requested < 0:
        raise ValueError("STOMATCH_THREADS must be >= 0")
    if requested == 0:
        requested = os.cpu_count() or 1
    return max(1, min(requested, n_chunks))


# -- arrivals -------------------------------------------------------------------

@dataclass(frozen=True)
class ArrivalSequence:
    model: str
    arrivals: tuple[str, ...]
    seed: int
    trial: int = 0

    def __len__(self) -> int:
        return len(self.arrivals)


def _type_cdf(inst: Instance) -> np.ndarray:
    rates = np.array([t.rate for t in inst.types])
    cdf = np.cumsum(rates) / rates.sum()
    cdf[-1] = 1.0
    return cdf


def _draw_type_matrix(inst: Instance, model: str, seed: int, trial_ids: np.ndarray):
    """Arrival counts (T,) and type indices (T, M), -1 past each trial's count."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    T = len(trial_ids)
    if not inst.types:
        return np.zeros(T, dtype=np.int64), np.zeros((T, 0), dtype=np.int64)
    if model == FIXED:
        counts = np.full(T, integral_total_rate(inst), dtype=np.int64)
    else:
        u0 = uniforms(seed, trial_ids, STREAM_ARRIVALS, 0)
        counts = np.maximum(poisson.ppf(u0, inst.total_rate), 0).astype(np.int64)
    M = int(counts.max(initial=0))
    u = uniform_block(seed, trial_ids, STREAM_ARRIVALS, 1, M)
    types = np.minimum(np.searchsorted(_type_cdf(inst), u, side="right"), len(inst.types) - 1)
    types[np.arange(M)[None, :] >= counts[:, None]] = -1
    return counts, types.astype(np.int64)


def draw_arrivals(inst: Instance, model: str, seed: int, trial: int = 0) -> ArrivalSequence:
    """Poisson(Lambda) i.i.d. arrivals, or exactly Lambda of them in the fixed model."""
    _, types = _draw_type_matrix(inst, model, seed, np.array([trial]))
    ids = inst.type_ids
    return ArrivalSequence(model, tuple(ids[r] for r in types[0] if r >= 0), seed, trial)


# -- compiled plan and the algorithm ----------------------------------------------

@dataclass
class CompiledPlan:
    offline: list[str]
    pj: np.ndarray       # (n_types, S) first entries, BOT = len(offline)
    pk: np.ndarray       # (n_types, S) second entries
    cum: np.ndarray      # (n_types, S) cumulative probabilities, padding 2.0
    weight: np.ndarray   # (n_types, n_offline + 1), BOT column 0


def compile_plan(inst: Instance, plan: SamplingPlan) -> CompiledPlan:
    offline = inst.offline_ids
    col = {j: c for c, j in enumerate(offline)}
    col[BOT] = len(offline)
    width = max([len(plan.dists[t.id].support) for t in inst.types if t.id in plan.dists] + [1])
    nI = len(inst.types)
    pj = np.full((nI, width), len(offline), dtype=np.int64)
    pk = np.full((nI, width), len(offline), dtype=np.int64)
    cum = np.full((nI, width), 2.0)
    weight = np.zeros((nI, len(offline) + 1))
    for r, t in enumerate(inst.types):
        for j, w in t.edges.items():
            weight[r, col[j]] = w
        if t.id not in plan.dists:
            continue
        support = plan.dists[t.id].support
        probs = np.array([p for _, p in support])
        c = np.cumsum(probs)
        c[-1] = 1.0
        for s, ((j, k), _) in enumerate(support):
            pj[r, s], pk[r, s] = col[j], col[k]
        cum[r, :len(support)] = c
    return CompiledPlan(offline, pj, pk, cum, weight)


@dataclass
class TrialResult:
    matched: list[tuple[int, str, str, float]]
    total_weight: float
    per_index_gain: list[float]
    offline_matched_by: dict[str, str | None]


def run_pair_sampling(inst: Instance, plan: SamplingPlan, arrivals: ArrivalSequence,
                      seed: int | None = None, trial: int | None = None) -> TrialResult:
    """Process the arrivals in order: sample (j, k) from the type's pair
    distribution and match j if it is free, else k if it is free."""
    seed = arrivals.seed if seed is None else seed
    trial = arrivals.trial if trial is None else trial
    for tid in set(arrivals.arrivals):
        if tid not in plan.dists:
            raise KeyError(f"arriving type {tid!r} has no pair distribution in the plan")
    cp = compile_plan(inst, plan)
    row = {t.id: r for r, t in enumerate(inst.types)}
    n_off = len(cp.offline)
    u = uniform_block(seed, [trial], STREAM_ALGORITHM, 0, len(arrivals))[0]
    taken = [False] * n_off + [True]
    matched, gains = [], []
    by = {j: None for j in cp.offline}
    for pos, tid in enumerate(arrivals.arrivals):
        r = row[tid]
        s = int(np.searchsorted(cp.cum[r], u[pos], side="right"))
        j, k = int(cp.pj[r, s]), int(cp.pk[r, s])
        choice = j if not taken[j] else (k if not taken[k] else -1)
        if choice < 0:
            gains.append(0.0)
            continue
        taken[choice] = True
        w = float(cp.weight[r, choice])
        gains.append(w)
        matched.append((pos, tid, cp.offline[choice], w))
        by[cp.offline[choice]] = tid
    return TrialResult(matched, math.fsum(gains), gains, by)


@dataclass
class BatchResult:
    model: str
    seed: int
    trial_ids: np.ndarray
    counts: np.ndarray        # (T,)
    types: np.ndarray         # (T, M), -1 padded
    gains: np.ndarray         # (T, M)
    match_type: np.ndarray    # (T, n_offline) type index that matched j, or -1
    pair_j: np.ndarray        # (T, M) sampled first entry, -1 padded
    pair_k: np.ndarray        # (T, M)
    alg: np.ndarray           # (T,)
    opt: np.ndarray | None = None
    opt_assign: np.ndarray | None = None   # (T, n_types, n_offline) counts

    @property
    def trials(self) -> int:
        return len(self.trial_ids)


def _run_chunk(cp: CompiledPlan, counts, types, u_alg):
    T, M = types.shape
    n_off = len(cp.offline)
    taken = np.zeros((T, n_off + 1), dtype=bool)
    taken[:, n_off] = True
    match_type = np.full((T, n_off), -1, dtype=np.int32)
    gains = np.zeros((T, M))
    pair_j = np.full((T, M), -1, dtype=np.int32)
    pair_k = np.full((T, M), -1, dtype=np.int32)
    rows = np.arange(T)
    for n in range(M):
        active = types[:, n] >= 0
        if not active.any():
            break
        r = np.where(active, types[:, n], 0)
        s = (cp.cum[r] <= u_alg[:, n:n + 1]).sum(axis=1)
        j = cp.pj[r, s]
        k = cp.pk[r, s]
        take_j = active & ~taken[rows, j]
        take_k = active & ~take_j & ~taken[rows, k]
        choice = np.where(take_j, j, np.where(take_k, k, -1))
        hit = choice >= 0
        hr, hc = rows[hit], choice[hit]
        taken[hr, hc] = True
        match_type[hr, hc] = r[hit]
        gains[hr, n] = cp.weight[r[hit], hc]
        pair_j[active, n] = j[active]
        pair_k[active, n] = k[active]
    return match_type, gains, pair_j, pair_k


def _pad(arrays, width, fill):
    out = []
    for a in arrays:
        if a.shape[1] < width:
            pad = np.full((a.shape[0], width - a.shape[1]), fill, dtype=a.dtype)
            a = np.hstack([a, pad])
        out.append(a)
    return np.vstack(out) if out else np.zeros((0, width))


def _type_counts(types: np.ndarray, n_types: int) -> np.ndarray:
    return np.stack([(types == r).sum(axis=1) for r in range(n_types)], axis=1) \
        if n_types else np.zeros((types.shape[0], 0), dtype=np.int64)


def _opt_for_counts(inst: Instance, type_counts: np.ndarray):
    """Offline optimum for every arrival multiset (rows of ``type_counts``).

    The optimum depends only on the multiset, so each distinct row is solved
    once, with arrivals in canonical order (grouped by type index).
    """
    T, nI = type_counts.shape
    nJ = len(inst.offline)
    opt = np.zeros(T)
    assign = np.zeros((T, nI, nJ), dtype=np.int32)
    if T == 0 or nJ == 0 or nI == 0:
        return opt, assign
    W = inst.weight_matrix()
    perm = np.argsort(np.array(inst.offline_ids, dtype=object), kind="stable")
    uniq, inverse = np.unique(type_counts, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    u_opt = np.zeros(len(uniq))
    u_assign = np.zeros((len(uniq), nI, nJ), dtype=np.int32)
    for q, row in enumerate(uniq):
        arrivals = np.repeat(np.arange(nI), row)
        if arrivals.size == 0:
            continue
        total, col = max_weight_matching(W[arrivals][:, perm])
        u_opt[q] = total
        for a, c in enumerate(col):
            if c >= 0:
                u_assign[q, arrivals[a], perm[c]] += 1
    return u_opt[inverse], u_assign[inverse]


def simulate_trials(inst: Instance, plan: SamplingPlan | None, model: str, trials: int,
                    seed: int, want_opt: bool = False) -> BatchResult:
    """Run trials 0 .. trials-1; ``plan=None`` draws arrivals (and OPT) only."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ids = np.arange(trials, dtype=np.int64)
    chunks = [ids[a:a + CHUNK] for a in range(0, trials, CHUNK)]
    cp = compile_plan(inst, plan) if plan is not None else None
    n_off = len(inst.offline)

    def work(chunk):
        counts, types = _draw_type_matrix(inst, model, seed, chunk)
        M = types.shape[1]
        if cp is None:
            T = len(chunk)
            empty = np.full((T, M), -1, dtype=np.int32)
            return counts, types, np.full((T, n_off), -1, np.int32), np.zeros((T, M)), empty, empty
        u_alg = uniform_block(seed, chunk, STREAM_ALGORITHM, 0, M)
        return (counts, types) + _run_chunk(cp, counts, types, u_alg)

    workers = _threads(len(chunks))
    if workers == 1:
        parts = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))

    width = max(p[1].shape[1] for p in parts)
    counts = np.concatenate([p[0] for p in parts])
    types = _pad([p[1] for p in parts], width, -1).astype(np.int64)
    match_type = np.vstack([p[2] for p in parts])
    gains = _pad([p[3] for p in parts], width, 0.0)
    pair_j = _pad([p[4] for p in parts], width, -1).astype(np.int32)
    pair_k = _pad([p[5] for p in parts], width, -1).astype(np.int32)
    batch = BatchResult(model, seed, ids, counts, types, gains, match_type, pair_j, pair_k,
                        gains.sum(axis=1))
    if want_opt:
        batch.opt, batch.opt_assign = _opt_for_counts(inst, _type_counts(types, len(inst.types)))
    return batch


# -- offline optimum ----------------------------------------------------------------

def offline_optimum(inst: Instance, arrivals: ArrivalSequence) -> tuple[float, list[tuple[int, str]]]:
    """Maximum-weight matching of the realized graph.

    Rows are the arrivals in index order and columns the offline vertices in
    id order, so the deterministic tie-breaking of ``max_weight_matching``
    favours earlier arrivals and smaller offline ids.
    """
    if not arrivals.arrivals or not inst.offline:
        return 0.0, []
    W = inst.weight_matrix()
    row = {t.id: r for r, t in enumerate(inst.types)}
    ids = sorted(inst.offline_ids)
    perm = [inst.offline_ids.index(j) for j in ids]
    sub = W[[row[t] for t in arrivals.arrivals]][:, perm]
    total, col = max_weight_matching(sub)
    return total, [(a, ids[c]) for a, c in enumerate(col) if c >= 0]


def expected_opt_exact(inst: Instance, model: str, tail_tol: float = 1e-14) -> float:
    """E[OPT] by enumerating arrival multisets; only for tiny instances.

    Fixed model: multinomial over exactly Lambda arrivals.  Poisson model:
    the per-type counts are independent Poisson(lambda_i); totals are summed
    until the remaining Poisson(Lambda) tail mass drops below ``tail_tol``.
    """
    nI = len(inst.types)
    if nI == 0 or not inst.offline:
        return 0.0
    rates = np.array([t.rate for t in inst.types])
    lam = rates.sum()
    probs = rates / lam
    if model == FIXED:
        totals = [integral_total_rate(inst)]
    elif model == POISSON:
        top = int(poisson.isf(tail_tol, lam)) + 1
        totals = range(0, top + 1)
    else:
        raise ValueError(f"unknown model {model!r}")
    cache: dict[tuple, float] = {}
    acc = []
    for m in totals:
        weight_m = 1.0 if model == FIXED else float(poisson.pmf(m, lam))
        for combo in itertools.combinations_with_replacement(range(nI), m):
            counts = np.bincount(np.array(combo, dtype=int), minlength=nI)
            log_p = math.lgamma(m + 1) + float(np.sum(counts * np.log(probs)
                                                      - [math.lgamma(c + 1) for c in counts]))
            key = tuple(counts)
            if key not in cache:
                cache[key] = float(_opt_for_counts(inst, counts[None, :])[0][0])
            acc.append(weight_m * math.exp(log_p) * cache[key])
    return math.fsum(acc)


# -- reports ----------------------------------------------------------------------

@dataclass
class MCReport:
    model: str
    plan_kind: str
    trials: int
    seed: int
    mean_alg: float
    stderr_alg: float
    nat: float
    ratio_vs_nat: float | None
    stderr_ratio: float | None
    offline_match_freq: dict[str, tuple[float, float]]
    gain_curve: list[tuple[int, float, float]]
    mean_opt: float | None = None
    stderr_opt: float | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model, "plan": self.plan_kind, "trials": self.trials, "seed": self.seed,
            "mean_alg": self.mean_alg, "stderr_alg": self.stderr_alg,
            "mean_opt": self.mean_opt, "stderr_opt": self.stderr_opt,
            "nat": self.nat, "ratio_vs_nat": self.ratio_vs_nat, "stderr_ratio": self.stderr_ratio,
            "offline_match_freq": {j: {"freq": f, "stderr": s}
                                   for j, (f, s) in sorted(self.offline_match_freq.items())},
        }

    def write(self, directory, bounds: dict[str, float] | None = None) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "mc_report.json").write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        with (directory / "gain_curve.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "mean_gain", "stderr"])
            for n, m, s in self.gain_curve:
                w.writerow([n, repr(m), repr(s)])
        with (directory / "offline.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["offline_id", "freq", "stderr", "bound"])
            for j, (f, s) in sorted(self.offline_match_freq.items()):
                b = "" if bounds is None else repr(bounds.get(j, 0.0))
                w.writerow([j, repr(f), repr(s), b])


def _gain_curve(inst: Instance, batch: BatchResult) -> list[tuple[int, float, float]]:
    if batch.model == FIXED:
        length = integral_total_rate(inst)
    else:
        length = int(math.floor(inst.total_rate))
    length = min(length, batch.gains.shape[1])
    return [(n + 1, float(batch.gains[:, n].mean()), _stderr(batch.gains[:, n]))
            for n in range(length)]


def report_from_batch(inst: Instance, batch: BatchResult, plan_kind: str, nat: float) -> MCReport:
    mean_alg, se_alg = float(batch.alg.mean()), _stderr(batch.alg)
    freq = {}
    for c, j in enumerate(inst.offline_ids):
        hit = (batch.match_type[:, c] >= 0).astype(float)
        freq[j] = (float(hit.mean()), _stderr(hit))
    ratio = mean_alg / nat if nat > 0 else None
    se_ratio = se_alg / nat if nat > 0 else None
    rep = MCReport(batch.model, plan_kind, batch.trials, batch.seed, mean_alg, se_alg, nat,
                   ratio, se_ratio, freq, _gain_curve(inst, batch))
    if batch.opt is not None:
        rep.mean_opt, rep.stderr_opt = float(batch.opt.mean()), _stderr(batch.opt)
    return rep


def monte_carlo(inst: Instance, plan: SamplingPlan, model: str = POISSON, trials: int = 10000,
                seed: int = 0, want_opt: bool = False, nat: float | None = None) -> MCReport:
    if nat is None:
        nat = solve_natural(inst).objective
    batch = simulate_trials(inst, plan, model, trials, seed, want_opt)
    return report_from_batch(inst, batch, plan.kind, nat)


def plan_match_bounds(inst: Instance, sol: FractionalSolution, plan: SamplingPlan) -> dict[str, float]:
    """Closed-form lower bound on P(j matched) in the Poisson model, per offline j."""
    bounds = {}
    if plan.kind == AMORTIZED:
        ref = build_wasteful(inst, sol, check=False).rates
        beta = plan.params["beta_drop"]
        for j in inst.offline_ids:
            resample = math.fsum(ref.get(k, j) for k in inst.offline_ids if k != j)
            x_j = min(max(sol.x_j.get(j, 0.0), 0.0), 1.0)
            bounds[j] = amortized_match_lower_bound(x_j, ref.mu_j[j], ref.mu_perp_j[j], resample, beta)
    else:
        r = plan.rates
        for j in inst.offline_ids:
            pairs = [(r.mu_j[k], min(r.get(k, j), r.mu_j[k]))
                     for k in inst.offline_ids if k != j and r.get(k, j) > 0]
            bounds[j] = match_prob_lower_bound(r.mu_j[j], r.mu_perp_j[j], pairs)
    return bounds


@dataclass
class OfflineRow:
    offline_id: str
    freq: float
    stderr: float
    bound: float
    flagged: bool


@dataclass
class MatchProbReport:
    plan_kind: str
    model: str
    trials: int
    rows: list[OfflineRow]

    @property
    def flags(self) -> list[str]:
        return [r.offline_id for r in self.rows if r.flagged]

    @property
    def passed(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        return {"plan": self.plan_kind, "model": self.model, "trials": self.trials,
                "passed": self.passed, "flags": self.flags,
                "rows": [vars(r) for r in self.rows]}


def match_prob_report(inst: Instance, sol: FractionalSolution, plan: SamplingPlan,
                      model: str = POISSON, trials: int = 10000, seed: int = 0,
                      batch: BatchResult | None = None) -> MatchProbReport:
    """Empirical match frequency of each offline vertex against its bound."""
    if batch is None:
        batch = simulate_trials(inst, plan, model, trials, seed)
    bounds = plan_match_bounds(inst, sol, plan)
    rows = []
    for c, j in enumerate(inst.offline_ids):
        hit = (batch.match_type[:, c] >= 0).astype(float)
        f, se = float(hit.mean()), _stderr(hit)
        rows.append(OfflineRow(j, f, se, bounds[j], f + SIGMAS * se + 1e-12 < bounds[j]))
    return MatchProbReport(plan.kind, batch.model, batch.trials, rows)


def first_arrival_gain(inst: Instance, plan: SamplingPlan) -> float:
    """Exact ALG_1: the first arrival takes the first non-BOT entry of its pair."""
    terms = []
    lam = inst.total_rate
    for t in inst.types:
        for (j, k), p in plan.dists[t.id].support:
            target = j if j != BOT else k
            if target != BOT:
                terms.append(t.rate / lam * p * t.edges.get(target, 0.0))
    return math.fsum(terms)


@dataclass
class MonotonicityReport:
    plan_kind: str
    trials: int
    alpha: float | None
    curve: list[tuple[int, float, float]]
    first_gain_exact: float
    violations: list[tuple[int, int, float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"plan": self.plan_kind, "trials": self.trials, "alpha": self.alpha,
                "passed": self.passed, "first_gain_exact": self.first_gain_exact,
                "curve": [{"n": n, "mean_gain": m, "stderr": s} for n, m, s in self.curve],
                "violations": [{"n": n, "l": l, "excess": e, "stderr": s}
                               for n, l, e, s in self.violations]}


def monotonicity_report(inst: Instance, plan: SamplingPlan, trials: int = 10000,
                        seed: int = 0, batch: BatchResult | None = None) -> MonotonicityReport:
    """Per-position gains ALG_n in the fixed model.

    Plans other than amortized are checked for ALG_n <= ALG_{n-1}; amortized
    plans for ALG_n <= alpha ALG_l (every l < n) with alpha = 2/(1 - beta_drop).
    Each comparison uses the per-trial paired difference and its 3-sigma band.
    """
    lam = integral_total_rate(inst)
    if batch is None:
        batch = simulate_trials(inst, plan, FIXED, trials, seed)
    g = batch.gains[:, :lam]
    alpha = 2.0 / (1.0 - plan.params["beta_drop"]) if plan.kind == AMORTIZED else None
    rep = MonotonicityReport(plan.kind, batch.trials, alpha, _gain_curve(inst, batch),
                             first_arrival_gain(inst, plan))
    for n in range(1, lam):
        earlier = [n - 1] if alpha is None else range(n)
        for l in earlier:
            diff = g[:, n] - (1.0 if alpha is None else alpha) * g[:, l]
            excess, se = float(diff.mean()), _stderr(diff)
            if excess > SIGMAS * se + 1e-12:
                rep.violations.append((n + 1, l + 1, excess, se))
    return rep


@dataclass
class ModelComparison:
    trials: int
    lam: int
    tail: float
    means: dict[str, float]
    stderrs: dict[str, float]
    checks: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {"trials": self.trials, "lambda": self.lam, "poisson_tail": self.tail,
                "opt_floor_factor": 1.0 - self.tail, "means": self.means,
                "stderrs": self.stderrs, "checks": self.checks, "passed": self.passed}


def model_comparison(inst: Instance, plan: SamplingPlan, trials: int = 10000,
                     seed: int = 0) -> ModelComparison:
    """E[OPT] and E[ALG] in both arrival models, with the orderings between them.

    Checks: OPT_fixed >= OPT_poisson and OPT_poisson >= (1 - tail) OPT_fixed,
    where tail = poisson_tail(Lambda); for monotone (non-amortized) plans
    ALG_fixed >= ALG_poisson, and for amortized plans
    ALG_poisson - ALG_fixed <= alpha tail ALG_fixed.  All within 3 sigma.
    """
    lam = integral_total_rate(inst)
    tail = poisson_tail(lam)
    fixed = simulate_trials(inst, plan, FIXED, trials, seed, want_opt=True)
    pois = simulate_trials(inst, plan, POISSON, trials, seed, want_opt=True)
    means = {"opt_fixed": float(fixed.opt.mean()), "opt_poisson": float(pois.opt.mean()),
             "alg_fixed": float(fixed.alg.mean()), "alg_poisson": float(pois.alg.mean())}
    se = {"opt_fixed": _stderr(fixed.opt), "opt_poisson": _stderr(pois.opt),
          "alg_fixed": _stderr(fixed.alg), "alg_poisson": _stderr(pois.alg)}

    def holds(lhs, rhs, se_l, se_r, scale=1.0):
        return lhs - scale * rhs >= -SIGMAS * math.hypot(se_l, scale * se_r) - 1e-12

    checks = {
        "opt_fixed >= opt_poisson": holds(means["opt_fixed"], means["opt_poisson"],
                                          se["opt_fixed"], se["opt_poisson"]),
        "opt_poisson >= (1 - tail) opt_fixed": holds(means["opt_poisson"], means["opt_fixed"],
                                                     se["opt_poisson"], se["opt_fixed"], 1.0 - tail),
    }
    if plan.kind == AMORTIZED:
        alpha = 2.0 / (1.0 - plan.params["beta_drop"])
        checks["alg_fixed (1 + alpha tail) >= alg_poisson"] = holds(
            (1.0 + alpha * tail) * means["alg_fixed"], means["alg_poisson"],
            (1.0 + alpha * tail) * se["alg_fixed"], se["alg_poisson"])
    else:
        checks["alg_fixed >= alg_poisson"] = holds(means["alg_fixed"], means["alg_poisson"],
                                                   se["alg_fixed"], se["alg_poisson"])
    return ModelComparison(trials, lam, tail, means, se, checks)


@dataclass
class LPFeasibilityReport:
    trials: int
    model: str
    x_hat: dict[tuple[str, str], float]
    worst_excess: float          # max over constraints of (lhs - rhs) - 3 se
    worst_where: str
    mean_opt: float
    stderr_opt: float
    nat: float

    @property
    def feasible(self) -> bool:
        return self.worst_excess <= 1e-12

    @property
    def opt_below_nat(self) -> bool:
        return self.mean_opt <= self.nat + SIGMAS * self.stderr_opt + 1e-12

    @property
    def passed(self) -> bool:
        return self.feasible and self.opt_below_nat

    def to_dict(self) -> dict:
        return {"trials": self.trials, "model": self.model, "passed": self.passed,
                "feasible": self.feasible, "worst_excess": self.worst_excess,
                "worst_where": self.worst_where, "mean_opt": self.mean_opt,
                "stderr_opt": self.stderr_opt, "nat": self.nat,
                "opt_below_nat": self.opt_below_nat,
                "x_hat": {f"{i}:{j}": v for (i, j), v in sorted(self.x_hat.items())}}


def empirical_lp_feasibility(inst: Instance, model: str = POISSON, trials: int = 10000,
                             seed: int = 0, nat: float | None = None) -> LPFeasibilityReport:
    """x_hat_ij = frequency with which the offline optimum matches j to type i.

    Every natural-LP constraint is checked with a 3-sigma allowance from the
    per-trial values of its left-hand side: the capacity of type i uses the
    number of type-i arrivals matched, and each prefix set S of offline j
    uses the indicator that j is matched to a type in S.
    """
    if nat is None:
        nat = solve_natural(inst).objective
    batch = simulate_trials(inst, None, model, trials, seed, want_opt=True)
    A = batch.opt_assign.astype(float)          # (T, nI, nJ)
    x_hat_arr = A.mean(axis=0)
    ids, offs = inst.type_ids, inst.offline_ids
    x_hat = {(ids[r], offs[c]): float(x_hat_arr[r, c])
             for r in range(len(ids)) for c in range(len(offs)) if x_hat_arr[r, c] > 0}
    worst, where = -math.inf, ""
    for r, t in enumerate(inst.types):
        per_trial = A[:, r, :].sum(axis=1)
        excess = per_trial.mean() - t.rate - SIGMAS * _stderr(per_trial)
        if excess > worst:
            worst, where = float(excess), f"capacity of type {t.id}"
    row = {tid: r for r, tid in enumerate(ids)}
    for c, j in enumerate(offs):
        for pref in prefix_values(inst, x_hat, j):
            members = [row[i] for i in pref.subset]
            per_trial = A[:, members, c].sum(axis=1)
            excess = per_trial.mean() - pref.rhs - SIGMAS * _stderr(per_trial)
            if excess > worst:
                worst, where = float(excess), f"offline {j} subset {pref.subset}"
    if worst == -math.inf:
        worst = 0.0
    return LPFeasibilityReport(trials, model, x_hat, worst, where,
                               float(batch.opt.mean()), _stderr(batch.opt), nat)


# -- micro-simulations ----------------------------------------------------------------

def marked_arrival_microsim(mu_k: float, mu_kj: float, samples: int = 10 ** 6,
                    seed: int = 0) -> tuple[float, float]:
    """Frequency that a marked arrival follows the first arrival of the stream.

    Marked arrivals form a Poisson process of rate mu_kj and unmarked ones an
    independent process of rate mu_k - mu_kj on [0, 1].  The event holds when
    two or more marked arrivals occur, or exactly one occurs after the first
    unmarked one.  Returns (frequency, standard error).
    """
    if not 0 <= mu_kj <= mu_k:
        raise ValueError("need 0 <= mu_kj <= mu_k")
    trials = np.arange(samples, dtype=np.int64)
    u = uniform_block(seed, trials, STREAM_AUX, 0, 4)
    n_marked = poisson.ppf(u[:, 0], mu_kj) if mu_kj > 0 else np.zeros(samples)
    n_plain = poisson.ppf(u[:, 1], mu_k - mu_kj) if mu_k > mu_kj else np.zeros(samples)
    # Minimum of n uniforms on [0, 1]: 1 - U^(1/n).
    with np.errstate(divide="ignore"):
        t_marked = 1.0 - u[:, 2] ** (1.0 / np.maximum(n_marked, 1))
        t_plain = 1.0 - u[:, 3] ** (1.0 / np.maximum(n_plain, 1))
    event = (n_marked >= 2) | ((n_marked == 1) & (n_plain >= 1) & (t_plain < t_marked))
    event = event.astype(float)
    return float(event.mean()), _stderr(event)


def extended_type_counts(inst: Instance, plan: SamplingPlan, trials: int, seed: int = 0,
                         batch: BatchResult | None = None) -> dict[tuple[str, str], np.ndarray]:
    """Per-trial number of arrivals whose sampled pair is (j, k), Poisson model."""
    if batch is None:
        batch = simulate_trials(inst, plan, POISSON, trials, seed)
    names = inst.offline_ids + [BOT]
    n = len(names)
    code = np.where(batch.pair_j >= 0, batch.pair_j * n + batch.pair_k, -1)
    out = {}
    for c in np.unique(code[code >= 0]):
        out[(names[c // n], names[c % n])] = (code == c).sum(axis=1)
    return out
