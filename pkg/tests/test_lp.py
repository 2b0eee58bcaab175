import numpy as np
import pytest
from scipy.optimize import linprog

from stomatch.lp import LPError, SimplexLP, solve_lp


def test_small_max_problem():
    # max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x <= 3
    res = solve_lp(np.array([3.0, 2.0]), np.array([[1.0, 1.0], [1.0, 3.0], [1.0, 0.0]]),
                   np.array([4.0, 6.0, 3.0]))
    assert res.objective == pytest.approx(11.0)
    np.testing.assert_allclose(res.x, [3.0, 1.0], atol=1e-12)


def test_matches_scipy_on_random_problems():
    rng = np.random.default_rng(0)
    for _ in range(40):
        m, n = rng.integers(2, 12, size=2)
        A = rng.uniform(0, 1, size=(m, n))
        b = rng.uniform(0.5, 2, size=m)
        c = rng.uniform(-0.2, 1, size=n)
        ours = solve_lp(c, A, b)
        ref = linprog(-c, A_ub=A, b_ub=b, bounds=(0, None), method="highs")
        assert ours.objective == pytest.approx(-ref.fun, abs=1e-9)
        assert np.all(A @ ours.x <= b + 1e-9)


def test_warm_start_rows_match_cold_solve():
    rng = np.random.default_rng(1)
    A = rng.uniform(0, 1, size=(6, 5))
    b = rng.uniform(1, 2, size=6)
    c = rng.uniform(0, 1, size=5)
    lp = SimplexLP(c, A[:3], b[:3])
    lp.solve()
    lp.add_rows(A[3:], b[3:])
    warm = lp.solve()
    cold = solve_lp(c, A, b)
    assert warm.objective == pytest.approx(cold.objective, abs=1e-10)
    assert lp.m == 6


def test_unbounded_raises():
    with pytest.raises(LPError):
        solve_lp(np.array([1.0, 1.0]), np.array([[1.0, -1.0]]), np.array([1.0]))


def test_negative_rhs_rejected():
    with pytest.raises(ValueError):
        solve_lp(np.array([1.0]), np.array([[1.0]]), np.array([-1.0]))
