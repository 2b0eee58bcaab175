import itertools
import json
import math

import numpy as np
import pytest
from scipy.stats import chi2, poisson

from stomatch import simulator as sim
from stomatch.analysis import match_prob_lower_bound, unmatched_after_first
from stomatch.instance import BOT, GENERAL, VERTEX_WEIGHTED, gen_random_instance, gen_structured_instance, with_vertex_weights
from stomatch.natural_lp import solve_natural
from stomatch.sampling import PairDistribution, SamplingPlan, build_amortized, build_limit, build_plan, build_wasteful, rate_table
from stomatch.simulator import ArrivalSequence, FIXED, POISSON, ModelError

from conftest import make


def fixed_plan(inst, table):
    dists = {tid: PairDistribution(tid, tuple(sorted(pmf.items()))) for tid, pmf in table.items()}
    return SamplingPlan("wasteful", {}, dists, rate_table(inst, dists))


# -- arrivals ----------------------------------------------------------------------

def test_fixed_single_type():
    inst = make({"i": (3.0, ["j"])}, ["j"])
    for t in range(5):
        assert sim.draw_arrivals(inst, FIXED, seed=4, trial=t).arrivals == ("i", "i", "i")


def test_fixed_requires_integer_rate():
    inst = make({"i": (2.5, ["j"])}, ["j"])
    with pytest.raises(ModelError, match="integer total rate"):
        sim.draw_arrivals(inst, FIXED, seed=0)


def test_poisson_count_moments():
    inst = make({"i": (3.0, ["j"])}, ["j"])
    batch = sim.simulate_trials(inst, None, POISSON, 10 ** 6, seed=1)
    c = batch.counts.astype(float)
    se_mean = math.sqrt(3.0 / c.size)
    se_var = math.sqrt((3.0 + 2 * 9.0) / c.size)   # variance of the sample variance of Poisson(3)
    assert abs(c.mean() - 3.0) <= 3 * se_mean
    assert abs(c.var(ddof=1) - 3.0) <= 3 * se_var


@pytest.mark.parametrize("model", [POISSON, FIXED])
def test_type_fraction(model):
    inst = make({"a": (1.0, ["j"]), "b": (2.0, ["j"])}, ["j"])
    batch = sim.simulate_trials(inst, None, model, 400000, seed=2)
    types = batch.types[batch.types >= 0]
    frac = float((types == 0).mean())
    assert abs(frac - 1 / 3) <= 3 * math.sqrt(2 / 9 / types.size)


def test_arrivals_deterministic_and_consistent_with_batch():
    inst = gen_random_instance(4, 3, seed=3)
    batch = sim.simulate_trials(inst, None, POISSON, 50, seed=9)
    for t in range(50):
        a = sim.draw_arrivals(inst, POISSON, 9, t)
        assert a == sim.draw_arrivals(inst, POISSON, 9, t)
        assert [inst.type_ids.index(x) for x in a.arrivals] == list(batch.types[t, :batch.counts[t]])


# -- the algorithm -------------------------------------------------------------------

def test_forced_first_choice():
    inst = make({"i": (2.0, ["j"])}, ["j"])
    plan = fixed_plan(inst, {"i": {("j", BOT): 1.0}})
    res = sim.run_pair_sampling(inst, plan, ArrivalSequence(FIXED, ("i", "i"), 0))
    assert res.per_index_gain == [1.0, 0.0]
    assert res.matched == [(0, "i", "j", 1.0)]
    assert res.offline_matched_by == {"j": "i"}


def test_dummy_pair_never_matches():
    inst = make({"i": (2.0, ["j"])}, ["j"])
    plan = fixed_plan(inst, {"i": {(BOT, BOT): 1.0}})
    res = sim.run_pair_sampling(inst, plan, ArrivalSequence(FIXED, ("i", "i"), 0))
    assert res.total_weight == 0.0 and res.matched == []


def test_backup_used_when_first_taken():
    inst = make({"i": (2.0, ["j1", "j2"])}, ["j1", "j2"])
    plan = fixed_plan(inst, {"i": {("j1", "j2"): 1.0}})
    res = sim.run_pair_sampling(inst, plan, ArrivalSequence(FIXED, ("i", "i"), 0))
    assert [m[2] for m in res.matched] == ["j1", "j2"]


def test_missing_type_rejected():
    inst = make({"a": (1.0, ["j"]), "b": (1.0, ["j"])}, ["j"])
    plan = fixed_plan(inst, {"a": {("j", BOT): 1.0}, "b": {("j", BOT): 1.0}})
    plan.dists.pop("b")
    with pytest.raises(KeyError):
        sim.run_pair_sampling(inst, plan, ArrivalSequence(FIXED, ("a", "b"), 0))


@pytest.mark.parametrize("mode", [None, VERTEX_WEIGHTED, GENERAL])
def test_scalar_reference_matches_batch(mode):
    kwargs = {"mode": mode, "weight_range": (1, 5)} if mode else {}
    inst = gen_random_instance(5, 4, density=0.6, seed=12, **kwargs)
    sol = solve_natural(inst)
    for kind in ("wasteful", "limit", "amortized"):
        plan = build_plan(inst, sol, kind)
        batch = sim.simulate_trials(inst, plan, POISSON, 200, seed=5)
        for t in range(200):
            res = sim.run_pair_sampling(inst, plan, sim.draw_arrivals(inst, POISSON, 5, t))
            assert res.total_weight == pytest.approx(batch.alg[t], abs=1e-12)
            taken = [j for _, _, j, _ in res.matched]
            assert len(taken) == len(set(taken))
            for pos, tid, j, w in res.matched:
                assert inst.type_by_id(tid).edges[j] == w


def test_single_offline_equality(star_75_25):
    inst = star_75_25
    sol = solve_natural(inst)
    plan = build_wasteful(inst, sol)
    r = plan.rates
    exact = match_prob_lower_bound(r.mu_j["j"], r.mu_perp_j["j"])
    rep = sim.match_prob_report(inst, sol, plan, trials=10 ** 6, seed=3)
    row = rep.rows[0]
    assert abs(row.freq - exact) <= 3 * row.stderr
    assert rep.passed


# -- offline optimum -------------------------------------------------------------------

def test_offline_optimum_examples():
    inst = make({"i": (1.0, {"j1": 1.0, "j2": 5.0})}, ["j1", "j2"], mode=GENERAL)
    assert sim.offline_optimum(inst, ArrivalSequence(FIXED, ("i",), 0)) == (5.0, [(0, "j2")])
    inst = make({"i": (2.0, ["j"])}, ["j"])
    w, m = sim.offline_optimum(inst, ArrivalSequence(FIXED, ("i", "i"), 0))
    assert w == 1.0 and m == [(0, "j")]


def brute_opt(inst, arrivals):
    W = inst.weight_matrix()
    row = {t: r for r, t in enumerate(inst.type_ids)}
    rows = [row[a] for a in arrivals]
    best = 0.0
    n, m = len(rows), W.shape[1]
    for k in range(min(n, m) + 1):
        for sel in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(m), k):
                best = max(best, sum(W[rows[a], c] for a, c in zip(sel, cols)))
    return best


def test_offline_optimum_brute_force():
    rng = np.random.default_rng(0)
    for seed in range(40):
        inst = gen_random_instance(int(rng.integers(1, 5)), int(rng.integers(1, 6)), density=0.6,
                                   mode=GENERAL, weight_range=(1, 9), seed=seed)
        n = int(rng.integers(0, 7))
        arrivals = tuple(rng.choice(inst.type_ids, size=n))
        w, _ = sim.offline_optimum(inst, ArrivalSequence(FIXED, arrivals, 0))
        assert w == pytest.approx(brute_opt(inst, arrivals), abs=1e-9)


def test_batch_opt_matches_offline_optimum():
    inst = gen_random_instance(4, 4, density=0.5, mode=VERTEX_WEIGHTED, weight_range=(1, 5), seed=2)
    batch = sim.simulate_trials(inst, None, POISSON, 300, seed=8, want_opt=True)
    for t in range(300):
        w, _ = sim.offline_optimum(inst, sim.draw_arrivals(inst, POISSON, 8, t))
        assert batch.opt[t] == pytest.approx(w, abs=1e-12)


def test_expected_opt_exact_star():
    star = gen_structured_instance("star", 1)
    assert sim.expected_opt_exact(star, FIXED) == pytest.approx(1.0, abs=1e-15)
    assert sim.expected_opt_exact(star, POISSON) == pytest.approx(1 - math.exp(-1), abs=1e-12)


# -- Monte Carlo -----------------------------------------------------------------------

def test_single_trial_report():
    inst = gen_structured_instance("two_cycle", 3)
    sol = solve_natural(inst)
    plan = build_limit(inst, sol)
    rep = sim.monte_carlo(inst, plan, POISSON, trials=1, seed=4)
    single = sim.run_pair_sampling(inst, plan, sim.draw_arrivals(inst, POISSON, 4, 0))
    assert rep.mean_alg == pytest.approx(single.total_weight)
    assert rep.stderr_alg == 0.0


def test_determinism_across_schedules(monkeypatch):
    inst = gen_random_instance(5, 5, seed=1)
    sol = solve_natural(inst)
    plan = build_wasteful(inst, sol)
    base = sim.monte_carlo(inst, plan, POISSON, 3000, seed=11, want_opt=True, nat=sol.objective)
    monkeypatch.setattr(sim, "CHUNK", 128)
    monkeypatch.setenv("STOMATCH_THREADS", "4")
    other = sim.monte_carlo(inst, plan, POISSON, 3000, seed=11, want_opt=True, nat=sol.objective)
    assert json.dumps(base.to_dict()) == json.dumps(other.to_dict())
    assert base.gain_curve == other.gain_curve


def test_report_files(tmp_path):
    inst = gen_structured_instance("complete_uniform", 2, 2)
    sol = solve_natural(inst)
    plan = build_limit(inst, sol)
    rep = sim.monte_carlo(inst, plan, FIXED, 500, seed=0, nat=sol.objective)
    rep.write(tmp_path, sim.plan_match_bounds(inst, sol, plan))
    assert (tmp_path / "gain_curve.csv").read_text().splitlines()[0] == "n,mean_gain,stderr"
    assert len((tmp_path / "gain_curve.csv").read_text().splitlines()) == 3
    lines = (tmp_path / "offline.csv").read_text().splitlines()
    assert lines[0] == "offline_id,freq,stderr,bound" and len(lines) == 3
    json.loads((tmp_path / "mc_report.json").read_text())


def test_match_prob_zero_mass_vertex():
    inst = make({"i": (1.0, ["j1"])}, ["j1", "j2"])
    sol = solve_natural(inst)
    rep = sim.match_prob_report(inst, sol, build_wasteful(inst, sol), trials=2000, seed=1)
    row = [r for r in rep.rows if r.offline_id == "j2"][0]
    assert row.freq == 0.0 and row.bound == 0.0 and not row.flagged


def test_match_prob_two_cycle_limit():
    inst = gen_structured_instance("two_cycle", 3)
    sol = solve_natural(inst)
    assert sim.match_prob_report(inst, sol, build_limit(inst, sol), trials=10 ** 5, seed=2).passed


def test_monotonicity_vacuous_and_first_gain():
    star = gen_structured_instance("star", 1)
    sol = solve_natural(star)
    assert sim.monotonicity_report(star, build_wasteful(star, sol), 100, seed=0).passed
    inst = gen_structured_instance("complete_uniform", 4, 4)
    sol = solve_natural(inst)
    plan = build_wasteful(inst, sol)
    rep = sim.monotonicity_report(inst, plan, 10 ** 5, seed=3)
    assert rep.passed, rep.violations
    n1, mean1, se1 = rep.curve[0]
    assert abs(mean1 - rep.first_gain_exact) <= 3 * se1 + 1e-12


def test_monotonicity_amortized_weighted():
    inst = with_vertex_weights(gen_structured_instance("complete_uniform", 3, 3), (1, 10), seed=1)
    sol = solve_natural(inst)
    rep = sim.monotonicity_report(inst, build_amortized(inst, sol), 10 ** 5, seed=4)
    assert rep.alpha == pytest.approx(2 / (1 - 0.299))
    assert rep.passed


def test_monotonicity_requires_integer_rate():
    inst = make({"i": (1.5, ["j"])}, ["j"])
    with pytest.raises(ModelError):
        sim.monotonicity_report(inst, build_wasteful(inst, solve_natural(inst)), 10, 0)


def test_model_comparison_star():
    star = gen_structured_instance("star", 1)
    rep = sim.model_comparison(star, build_wasteful(star, solve_natural(star)), 20000, seed=1)
    assert rep.means["opt_fixed"] == 1.0 and rep.stderrs["opt_fixed"] == 0.0
    assert abs(rep.means["opt_poisson"] - (1 - math.exp(-1))) <= 3 * rep.stderrs["opt_poisson"]
    assert rep.tail == pytest.approx(math.exp(-1))
    assert rep.passed


def test_lp_feasibility_star_and_empty():
    star = gen_structured_instance("star", 1)
    rep = sim.empirical_lp_feasibility(star, trials=20000, seed=2)
    assert rep.passed
    se = math.sqrt(rep.x_hat[("i1", "j1")] * (1 - rep.x_hat[("i1", "j1")]) / 20000)
    assert rep.x_hat[("i1", "j1")] <= 1 - math.exp(-1) + 3 * se
    empty = make({"i": (1.0, [])}, ["j"])
    rep = sim.empirical_lp_feasibility(empty, trials=100, seed=0)
    assert rep.x_hat == {} and rep.passed


@pytest.mark.parametrize("mu_k, mu_kj", [(1.0, 1.0), (1.0, 0.5), (0.5, 0.2)])
def test_marked_arrival_microsimulation(mu_k, mu_kj):
    freq, se = sim.marked_arrival_microsim(mu_k, mu_kj, 10 ** 6, seed=5)
    assert abs(freq - unmatched_after_first(mu_k, mu_kj)) <= 3 * se


def test_extended_type_counts_are_independent_poissons():
    inst = gen_structured_instance("two_cycle", 3)
    sol = solve_natural(inst)
    plan = build_wasteful(inst, sol)
    trials = 10 ** 5
    counts = sim.extended_type_counts(inst, plan, trials, seed=6)
    assert set(counts) == {k for k, v in plan.rates.mu_jk.items() if v > 0}
    for pair, c in counts.items():
        mu = plan.rates.get(*pair)
        top = int(poisson.isf(1e-3, mu)) + 1
        observed = np.bincount(np.minimum(c, top), minlength=top + 1)
        expected = trials * np.append(poisson.pmf(np.arange(top), mu), poisson.sf(top - 1, mu))
        stat = float(((observed - expected) ** 2 / expected).sum())
        assert chi2.sf(stat, top) > 0.0027, pair
    keys = sorted(counts)
    bound = 3 / math.sqrt(trials)
    for a, b in itertools.combinations(keys, 2):
        r = np.corrcoef(counts[a], counts[b])[0, 1]
        assert abs(r) <= bound * 1.5, (a, b, r)
