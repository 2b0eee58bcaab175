import math

import numpy as np
import pytest
from scipy.special import gammaln

from stomatch.analysis import (BETA_DROP, ONE_MINUS_LN2, DomainError, StepFunction,
                               amortized_match_lower_bound, delta, jensen_battery,
                               jensen_converse_check, kappa, ratio_floor_function,
                               match_prob_lower_bound, phi, poisson_tail, unmatched_after_first,
                               verify_function_properties)

LN2 = math.log(2)


def phi_direct(x, y):
    if x == y:
        return math.log1p(x) - x
    return math.log(x / (x - y) * math.exp(-y) - y / (x - y) * math.exp(-x))


def test_phi_reference_points():
    assert phi(1.0, 1.0) == pytest.approx(LN2 - 1, abs=1e-12)
    assert phi(0.7, 0.0) == 0.0
    # ln(2 e^{-1/2} - e^{-1})
    assert phi(1.0, 0.5) == pytest.approx(math.log(2 * math.exp(-0.5) - math.exp(-1)), abs=1e-14)
    assert phi(1.0, 0.5) == pytest.approx(-0.1682034, abs=1e-7)


def test_phi_matches_direct_formula():
    for x in np.linspace(0.05, 3, 25):
        for y in np.linspace(0, x, 9)[:-1]:
            assert phi(x, y) == pytest.approx(phi_direct(x, y), abs=1e-12)


def test_phi_continuous_at_diagonal():
    for x in np.linspace(0.01, 1, 50):
        assert abs(phi(x, x) - phi(x, x - 1e-7)) <= 1e-6


def test_phi_domain():
    with pytest.raises(DomainError):
        phi(0.5, 1.0)
    with pytest.raises(DomainError):
        phi(-1.0, 0.0)


def test_unmatched_after_first_identity():
    g = np.linspace(0, 1, 41)
    X, Y = np.meshgrid(g, g, indexing="ij")
    ok = Y <= X
    s = np.exp(phi(X[ok], Y[ok])) + unmatched_after_first(X[ok], Y[ok])
    np.testing.assert_allclose(s, 1.0, atol=1e-10)
    assert unmatched_after_first(1.0, 1.0) == pytest.approx(1 - 2 / math.e, abs=1e-12)


def test_kappa_values():
    assert kappa(1.0, 1.0) == pytest.approx(LN2, abs=1e-15)
    assert kappa(1.0, 0.5) == pytest.approx(-(math.log(0.5) + 0.5), abs=1e-15)
    assert kappa(3.0, 0.75) == pytest.approx(0.75 - 1 + 3 * math.log(4 / 3), abs=1e-15)
    assert kappa(3.0, 0.75) == pytest.approx(0.6130462, abs=1e-7)
    # Continuous at the branch point x = 1/(beta+1).
    for beta in (1.0, 2.0, 1 / ONE_MINUS_LN2):
        b = 1 / (beta + 1)
        assert kappa(beta, b - 1e-12) == pytest.approx(kappa(beta, b), abs=1e-9)
    with pytest.raises(DomainError):
        kappa(0.5, 0.5)


def test_delta_values():
    assert delta(0.75) == pytest.approx((BETA_DROP - 0.75 * ONE_MINUS_LN2) / (1 - 1.5 * ONE_MINUS_LN2))
    assert delta(0.75) == pytest.approx(0.1275852, abs=1e-7)
    x_star = BETA_DROP / ONE_MINUS_LN2
    assert x_star == pytest.approx(0.9744085, abs=1e-7)
    assert delta(x_star) == pytest.approx(0.0, abs=1e-15)
    assert delta(1.0) == 0.0
    assert delta(0.0) == pytest.approx(BETA_DROP)


def test_delta_defining_inequality():
    x = np.linspace(0, 1, 10001)
    d = delta(x)
    assert np.all(ONE_MINUS_LN2 * (1 - 2 * d) * x + d >= BETA_DROP - 1e-12)


def test_match_bound_simple_cases():
    assert match_prob_lower_bound(0.0, 0.0) == 0.0
    assert match_prob_lower_bound(1.0, 0.0) == pytest.approx(1 - math.exp(-1))
    b = match_prob_lower_bound(0.5, 0.25, [(1.0, 0.5)])
    assert b == pytest.approx(1 - math.exp(-0.75 + phi(1.0, 0.5)))


def test_amortized_bound_example():
    # x_j = 1 with the wasteful rates of a unit star: mu_j(1) = 1, nothing else.
    assert amortized_match_lower_bound(1.0, 1.0, 0.0, 0.0) == pytest.approx(1 - math.exp(-1))
    val = amortized_match_lower_bound(0.75, 0.75, 0.0, 0.0)
    assert val == pytest.approx(1 - math.exp(-(1 - delta(0.75)) * 0.75))


def test_step_function_integral_closed_form():
    from stomatch.quadrature import adaptive_simpson
    for beta in (1.0, 2.0, 3.0):
        f = StepFunction.hinge(beta)
        for xj in (0.1, 0.5, 0.9, 1.0):
            if xj == 1.0:
                numeric = adaptive_simpson(lambda u: float(f(u)) / u, beta / (beta + 1), 1.0).value
            else:
                numeric = adaptive_simpson(lambda t: float(f(math.exp(-t))), 0, -math.log1p(-xj)).value
            assert f.exp_integral(xj) == pytest.approx(numeric, abs=1e-9)


def test_step_function_validation():
    with pytest.raises(ValueError):
        StepFunction((0.0, 0.5), (1.0, 0.0))
    assert StepFunction.zero()(0.7) == 0.0


def test_jensen_converse_star():
    # Single type of rate 1 at the constraint boundary.
    f = StepFunction.hinge(1.0)
    lhs, rhs = jensen_converse_check(f, [1.0], [1 - math.exp(-1)])
    assert lhs <= rhs + 1e-12
    with pytest.raises(DomainError):
        jensen_converse_check(f, [1.0], [0.9])


def test_jensen_battery():
    rep = jensen_battery(columns=300, seed=2)
    assert rep["passed"], rep


def test_poisson_tail():
    assert poisson_tail(1) == pytest.approx(math.exp(-1))
    assert poisson_tail(4) == pytest.approx(0.1953668, abs=1e-7)
    n = 10 ** 4
    ref = math.exp(n * math.log(n) - n - gammaln(n + 1))
    assert poisson_tail(n) == pytest.approx(ref, rel=1e-12)
    assert poisson_tail(n) * math.sqrt(n) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-3)
    with pytest.raises(DomainError):
        poisson_tail(2.5)


def test_ratio_floor_function_values():
    assert ratio_floor_function(0.5) == pytest.approx(2 * (1 - math.exp(-0.5)) + 0.5 * math.exp(-1) * (1 - 2 / math.e))
    assert ratio_floor_function(0.5) == pytest.approx(0.83554, abs=1e-5)


def test_function_property_grid():
    rep = verify_function_properties(grid_step=1e-3, convex_tol=1e-10)
    assert rep.passed, rep.to_dict()
