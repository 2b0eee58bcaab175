"""Auxiliary functions and probability bounds used by the ratio analysis.

phi(x, y) is the log-probability that no marked arrival follows the first
arrival of a Poisson stream of rate x whose marked sub-stream has rate y.
kappa and delta are the backup-mass bound and the amortized drop rate.
Everything here accepts scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import exprel

LN2 = math.log(2.0)
ONE_MINUS_LN2 = 1.0 - LN2
BETA_DROP = 0.299
# Base constant of the unweighted bounds: (1/e)(1 - 2/e).
EXTRA_COEF = math.exp(-1.0) * (1.0 - 2.0 * math.exp(-1.0))


class DomainError(ValueError):
    pass


def _scalar_or_array(value):
    arr = np.asarray(value, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def phi(x, y):
    """ln( x/(x-y) e^{-y} - y/(x-y) e^{-x} ), defined for 0 <= y <= x.

    Written as  -x + log1p(x * exprel(x - y))  with exprel(d) = (e^d - 1)/d,
    which is algebraically the same expression, has no cancellation as y
    approaches x, and equals ln(1 + x) - x on the diagonal.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("phi: arguments must be nonnegative")
    if np.any(y > x + 1e-12):
        raise DomainError("phi: requires y <= x")
    d = np.maximum(x - y, 0.0)
    return _scalar_or_array(-x + np.log1p(x * exprel(d)))


def unmatched_after_first(mu_k, mu_kj):
    """P(some marked arrival follows the first arrival), i.e. 1 - exp(phi)."""
    return _scalar_or_array(-np.expm1(phi(mu_k, mu_kj)))


def kappa(beta, x):
    """Lower bound on the outgoing backup mass of a vertex with marginal x."""
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(beta < 1):
        raise DomainError("kappa: beta must be >= 1")
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError("kappa: x must lie in [0, 1]")
    first = x <= 1.0 / (beta + 1.0)
    # Only evaluate log1p(-x) where the first branch applies (x < 1 there).
    safe = np.where(first, x, 0.0)
    low = -beta * (np.log1p(-safe) + safe)
    high = x - 1.0 + beta * np.log1p(1.0 / beta)
    return _scalar_or_array(np.where(first, low, high))


def delta(x, beta_drop: float = BETA_DROP):
    """Probability of dropping first choice j when its marginal is x."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError("delta: x must lie in [0, 1]")
    num = beta_drop - ONE_MINUS_LN2 * x
    den = 1.0 - 2.0 * ONE_MINUS_LN2 * x
    return _scalar_or_array(np.maximum(num / den, 0.0))


def match_prob_lower_bound(mu_j: float, mu_perp_j: float, resample_pairs=()) -> float:
    """Bound on P(j matched) from its first-choice, dummy-first and backup routes."""
    if mu_j < 0 or mu_perp_j < 0:
        raise DomainError("rates must be nonnegative")
    exponent = -mu_j - mu_perp_j
    for mu_k, mu_kj in resample_pairs:
        exponent += phi(mu_k, mu_kj)
    return float(-math.expm1(exponent))


def amortized_match_lower_bound(x_j: float, mu_j1: float, mu_perp_j1: float,
                                resample_mass1: float, beta_drop: float = BETA_DROP) -> float:
    """Bound on P(j matched) under the amortized plan, in wasteful-plan rates."""
    if min(mu_j1, mu_perp_j1, resample_mass1) < 0:
        raise DomainError("rates must be nonnegative")
    d = delta(x_j, beta_drop)
    exponent = -(1.0 - d) * mu_j1 - mu_perp_j1 - beta_drop * resample_mass1
    return float(-math.expm1(exponent))


# -- converse Jensen --------------------------------------------------------

@dataclass(frozen=True)
class StepFunction:
    """Convex piecewise-linear f on [0, 1] with f(0) = 0.

    ``breakpoints[0]`` is 0 and segment ``s`` covers
    [breakpoints[s], breakpoints[s+1]) with slope ``slopes[s]``.
    """
    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]

    def __post_init__(self):
        bp, sl = tuple(map(float, self.breakpoints)), tuple(map(float, self.slopes))
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", sl)
        if not bp or bp[0] != 0.0 or len(bp) != len(sl):
            raise ValueError("need breakpoints starting at 0, one slope per segment")
        if any(b >= a for a, b in zip(bp[1:], bp)) or bp[-1] >= 1.0:
            raise ValueError("breakpoints must increase strictly inside [0, 1)")
        if any(s2 < s1 for s1, s2 in zip(sl, sl[1:])):
            raise ValueError("slopes must be nondecreasing (convexity)")

    @classmethod
    def hinge(cls, beta: float) -> "StepFunction":
        """max{(beta + 1) x - beta, 0}."""
        return cls((0.0, beta / (beta + 1.0)), (0.0, beta + 1.0))

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls((0.0,), (0.0,))

    def _intercepts(self) -> list[float]:
        # value at each breakpoint, then intercept a_s of f(u) = a_s + slope_s u
        out, value = [], 0.0
        ends = self.breakpoints[1:] + (1.0,)
        for b, e, s in zip(self.breakpoints, ends, self.slopes):
            out.append(value - s * b)
            value += s * (e - b)
        return out

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        seg = np.searchsorted(np.asarray(self.breakpoints), u, side="right") - 1
        seg = np.clip(seg, 0, len(self.slopes) - 1)
        a = np.asarray(self._intercepts())[seg]
        s = np.asarray(self.slopes)[seg]
        return _scalar_or_array(a + s * u)

    def exp_integral(self, x_j: float) -> float:
        """Closed form of the integral of f(e^{-t}) for t from 0 to -ln(1 - x_j).

        With u = e^{-t} this is the integral of f(u)/u over [1 - x_j, 1];
        on a linear piece a + s u it equals a ln(u2/u1) + s (u2 - u1).
        """
        if not 0.0 <= x_j <= 1.0:
            raise DomainError("x_j must lie in [0, 1]")
        lower = 1.0 - x_j
        ends = self.breakpoints[1:] + (1.0,)
        total = []
        for b, e, s, a in zip(self.breakpoints, ends, self.slopes, self._intercepts()):
            u1, u2 = max(b, lower), e
            if u2 <= u1:
                continue
            term = s * (u2 - u1)
            if a != 0.0:
                term += a * math.log(u2 / u1)
            total.append(term)
        return math.fsum(total)


def column_violation(lambdas, x_col) -> float:
    """Worst violation of the subset constraints for one offline vertex."""
    lam = np.asarray(lambdas, dtype=float)
    x = np.asarray(x_col, dtype=float)
    order = sorted(range(len(lam)), key=lambda n: (-x[n] / lam[n], n))
    worst, lhs, rate = -math.inf, 0.0, 0.0
    for n in order:
        lhs += x[n]
        rate += lam[n]
        worst = max(worst, lhs + math.expm1(-rate))
    return worst


def jensen_converse_check(f: StepFunction, lambdas, x_col, tol: float = 1e-9) -> tuple[float, float]:
    """Return (sum_i lambda_i f(x_i / lambda_i), integral bound) for one column."""
    lam = np.asarray(lambdas, dtype=float)
    x = np.asarray(x_col, dtype=float)
    if lam.shape != x.shape or np.any(lam <= 0) or np.any(x < 0):
        raise DomainError("need matching positive rates and nonnegative x")
    if np.any(x > lam + tol):
        raise DomainError("x_i exceeds lambda_i")
    if lam.size and column_violation(lam, x) > tol:
        raise DomainError("column violates the natural LP's subset constraints")
    lhs = math.fsum((lam * np.asarray(f(np.minimum(x / lam, 1.0)))).tolist())
    x_j = min(float(x.sum()), 1.0)
    return lhs, f.exp_integral(x_j)



def random_feasible_column(rng: np.random.Generator, max_types: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Random rates and an x column scaled onto the boundary of the subset constraints."""
    n = int(rng.integers(1, max_types + 1))
    lam = rng.uniform(0.05, 2.0, size=n)
    direction = rng.uniform(0.0, 1.0, size=n) * lam
    lo, hi = 0.0, 1.0
    while column_violation(lam, hi * direction) <= 0 and hi < 1e6:
        lo, hi = hi, 2.0 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if column_violation(lam, mid * direction) <= 0 else (lo, mid)
    x = np.minimum(lo * direction * rng.uniform(0.5, 1.0), lam)
    return lam, x


def jensen_battery(columns: int = 1000, seed: int = 0, tol: float = 1e-9) -> dict:
    """Check lhs <= integral bound (and Jensen's lower direction) on random columns
    for the hinge functions with beta in {1, 1.5, 2, 3}."""
    rng = np.random.default_rng(seed)
    funcs = [StepFunction.hinge(b) for b in (1.0, 1.5, 2.0, 3.0)]
    upper = lower = 0
    worst = -math.inf
    for _ in range(columns):
        lam, x = random_feasible_column(rng)
        total = float(lam.sum())
        for f in funcs:
            lhs, rhs = jensen_converse_check(f, lam, x, tol)
            worst = max(worst, lhs - rhs)
            upper += lhs > rhs + tol
            lower += lhs < total * float(f(min(x.sum() / total, 1.0))) - tol
    return {"columns": columns, "functions": len(funcs), "upper_failures": int(upper),
            "lower_failures": int(lower), "worst_gap": worst, "passed": upper == 0 and lower == 0}

# -- Poisson tail -----------------------------------------------------------

def poisson_tail(lam) -> float:
    """L^L e^{-L} / L! for integer L >= 1, evaluated in log space."""
    if isinstance(lam, bool) or float(lam) != int(round(float(lam))) or lam < 1:
        raise DomainError(f"poisson_tail needs an integer >= 1, got {lam!r}")
    n = int(round(float(lam)))
    return math.exp(n * math.log(n) - n - math.lgamma(n + 1))


# -- grid checks of the analytic properties ------------------------------------

def ratio_floor_function(x):
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(-np.expm1(-x) / x + EXTRA_COEF * x)


@dataclass
class PropertyReport:
    grid_step: float
    counts: dict[str, int] = field(default_factory=dict)
    examples: dict[str, list[tuple]] = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return sum(self.counts.values())

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def _record(self, name: str, mask: np.ndarray, coords, limit: int = 5):
        idx = np.argwhere(mask)
        self.counts[name] = int(len(idx))
        self.examples[name] = [tuple(float(c[tuple(p)]) for c in coords) for p in idx[:limit]]

    def to_dict(self) -> dict:
        return {"grid_step": self.grid_step, "passed": self.passed,
                "counts": self.counts, "examples": self.examples}


def verify_function_properties(grid_step: float = 1e-3, mono_tol: float = 1e-12,
                               convex_tol: float = 1e-10, bound_tol: float = 1e-12) -> PropertyReport:
    """Grid checks: phi monotone and convex per coordinate, phi <= (ln2 - 1) x y,
    and the function of ``ratio_floor_function`` decreasing on [1/2, 1]."""
    n = int(round(1.0 / grid_step))
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g, indexing="ij")          # X[a, b] = g[a], Y[a, b] = g[b]
    valid = Y <= X
    P = np.full(X.shape, np.nan)
    P[valid] = phi(X[valid], Y[valid])
    rep = PropertyReport(grid_step)

    # Along x (axis 0) with y fixed and along y (axis 1) with x fixed.
    for axis, name in ((0, "x"), (1, "y")):
        d1 = np.diff(P, axis=axis)
        both = ~np.isnan(d1)
        rep._record(f"phi nonincreasing in {name}", both & (d1 > mono_tol),
                    (X[:-1] if axis == 0 else X[:, :-1], Y[:-1] if axis == 0 else Y[:, :-1]))
        d2 = np.diff(P, n=2, axis=axis)
        both = ~np.isnan(d2)
        rep._record(f"phi convex in {name}", both & (d2 < -convex_tol),
                    (X[1:-1] if axis == 0 else X[:, 1:-1], Y[1:-1] if axis == 0 else Y[:, 1:-1]))

    slack = (LN2 - 1.0) * X * Y - P
    rep._record("phi <= (ln2 - 1) x y", valid & (slack < -bound_tol), (X, Y))

    h = g[g >= 0.5]
    diffs = np.diff(ratio_floor_function(h))
    rep._record("ratio floor decreasing on [1/2, 1]", diffs > 0, (h[:-1],))
    return rep
