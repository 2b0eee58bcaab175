"""Adaptive Simpson quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable


class QuadratureError(RuntimeError):
    pass


@dataclass
class QuadResult:
    value: float
    error_estimate: float
    evaluations: int


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_depth: int = 50) -> QuadResult:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Each interval is split in two and accepted once the two-halves estimate
    agrees with the whole-interval estimate to within 15 * tol (the usual
    Richardson criterion); the accepted value carries the Richardson
    correction.  An explicit stack replaces recursion so deep refinement near
    a difficult point cannot hit the interpreter's recursion limit.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == b:
        return QuadResult(0.0, 0.0, 0)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0

    evals = 0

    def fx(x):
        nonlocal evals
        evals += 1
        y = f(x)
        if not math.isfinite(y):
            raise QuadratureError(f"integrand is not finite at x={x!r}")
        return y

    fa, fb = fx(a), fx(b)
    m = 0.5 * (a + b)
    fm = fx(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    total = 0.0
    err = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = fx(lm), fx(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - est
        if abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
            err += abs(delta) / 15.0
        elif depth >= max_depth:
            raise QuadratureError(
                f"no convergence on [{lo!r}, {hi!r}] after {max_depth} subdivisions")
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, eps / 2.0, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, eps / 2.0, depth + 1))
    return QuadResult(sign * total, err, evals)
