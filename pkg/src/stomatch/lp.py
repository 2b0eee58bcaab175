"""Dense tableau simplex for  max c.x  s.t.  A x <= b,  x >= 0.

The initial right-hand side must be nonnegative so that the slack basis is
feasible and no phase one is needed.  Rows added later (cuts) may be violated
by the current optimum; they are absorbed with dual simplex pivots, which
keeps the previous basis as a warm start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    """Unbounded or infeasible problem, or numerical breakdown of the simplex."""


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    basis: np.ndarray
    pivots: int


# Consecutive degenerate pivots tolerated before switching to Bland's rule.
_DEGENERATE_STREAK = 50
_MAX_REFRESH = 20
_PIVOT_EPS = 1e-12


class SimplexLP:
    """A simplex tableau that can grow by rows between solves."""

    def __init__(self, c, A, b, tol: float = 1e-11):
        c = np.asarray(c, dtype=float)
        b = np.asarray(b, dtype=float)
        A = np.asarray(A, dtype=float).reshape(len(b), len(c))
        if np.any(b < 0):
            raise ValueError("initial right-hand side must be nonnegative (x = 0 feasible)")
        self.n = len(c)
        self.c = c
        self.A = A
        self.b = b
        self.tol = tol
        self.basis = np.arange(self.n, self.n + len(b))
        self.pivots = 0
        self._refactor()

    @property
    def m(self) -> int:
        return len(self.b)

    def _full(self) -> np.ndarray:
        return np.hstack([self.A, np.eye(self.m)])

    def _cost(self) -> np.ndarray:
        return np.concatenate([self.c, np.zeros(self.m)])

    def _refactor(self) -> None:
        full = self._full()
        B = full[:, self.basis]
        try:
            self.T = np.linalg.solve(B, full)
            self.xb = np.linalg.solve(B, self.b)
        except np.linalg.LinAlgError as exc:
            raise LPError(f"singular basis: {exc}") from exc
        cost = self._cost()
        self.d = cost - cost[self.basis] @ self.T

    def add_rows(self, A_new, b_new) -> None:
        """Append constraints ``A_new x <= b_new`` with their slacks basic."""
        A_new = np.atleast_2d(np.asarray(A_new, dtype=float))
        b_new = np.atleast_1d(np.asarray(b_new, dtype=float))
        k = len(b_new)
        if k == 0:
            return
        m_old = self.m
        self.A = np.vstack([self.A, A_new])
        self.b = np.concatenate([self.b, b_new])
        # Widen the tableau by k slack columns, then append the new rows
        # written in terms of the current basis.
        T = np.hstack([self.T, np.zeros((m_old, k))])
        raw = np.hstack([A_new, np.zeros((k, m_old)), np.eye(k)])
        coef = raw[:, self.basis]
        rows = raw - coef @ T
        self.T = np.vstack([T, rows])
        self.xb = np.concatenate([self.xb, b_new - coef @ self.xb])
        self.d = np.concatenate([self.d, np.zeros(k)])
        self.basis = np.concatenate([self.basis, np.arange(self.n + m_old, self.n + m_old + k)])

    def solve(self, max_pivots: int | None = None) -> LPResult:
        if max_pivots is None:
            max_pivots = self.pivots + 50 * (self.m + self.n) + 1000
        scale = max(1.0, np.abs(self.c).max(initial=0.0))
        for _ in range(_MAX_REFRESH):
            self._dual_phase(max_pivots)
            self._primal_phase(max_pivots, scale)
            self._refactor()
            if np.all(self.d <= self.tol * scale) and np.all(self.xb >= -1e-9):
                break
        else:
            raise LPError("simplex failed to stabilise after re-factorisation")
        z = np.zeros(self.n + self.m)
        z[self.basis] = np.maximum(self.xb, 0.0)
        x = z[:self.n]
        return LPResult(x=x, objective=float(self.c @ x), basis=self.basis.copy(), pivots=self.pivots)

    def _pivot(self, row: int, col: int) -> None:
        T = self.T
        piv = T[row, col]
        T[row] /= piv
        self.xb[row] /= piv
        factor = T[:, col].copy()
        factor[row] = 0.0
        T -= np.outer(factor, T[row])
        self.xb -= factor * self.xb[row]
        self.d -= self.d[col] * T[row]
        self.basis[row] = col
        self.pivots += 1

    def _primal_phase(self, max_pivots: int, scale: float) -> None:
        streak = 0
        while True:
            candidates = np.flatnonzero(self.d > self.tol * scale)
            if candidates.size == 0:
                return
            if self.pivots >= max_pivots:
                raise LPError(f"pivot limit {max_pivots} exceeded")
            if streak >= _DEGENERATE_STREAK:
                col = candidates[0]
            else:
                col = candidates[np.argmax(self.d[candidates])]
            colv = self.T[:, col]
            rows = np.flatnonzero(colv > _PIVOT_EPS)
            if rows.size == 0:
                raise LPError("problem is unbounded")
            ratios = np.maximum(self.xb[rows], 0.0) / colv[rows]
            best = ratios.min()
            tied = rows[ratios <= best + 1e-14 * max(1.0, best)]
            # Ties go to the smallest basic variable index (Bland-compatible).
            row = tied[np.argmin(self.basis[tied])]
            streak = streak + 1 if best <= 1e-14 else 0
            self._pivot(row, col)

    def _dual_phase(self, max_pivots: int) -> None:
        streak = 0
        while True:
            infeasible = np.flatnonzero(self.xb < -1e-12)
            if infeasible.size == 0:
                return
            if self.pivots >= max_pivots:
                raise LPError(f"pivot limit {max_pivots} exceeded")
            if streak >= _DEGENERATE_STREAK:
                row = infeasible[np.argmin(self.basis[infeasible])]
            else:
                row = infeasible[np.argmin(self.xb[infeasible])]
            rowv = self.T[row]
            cols = np.flatnonzero(rowv < -_PIVOT_EPS)
            if cols.size == 0:
                raise LPError("problem is infeasible")
            ratios = np.minimum(self.d[cols], 0.0) / rowv[cols]
            best = ratios.min()
            col = cols[ratios <= best + 1e-14 * max(1.0, best)][0]
            streak = streak + 1 if best <= 1e-14 else 0
            self._pivot(row, col)


def solve_lp(c, A, b, tol: float = 1e-11) -> LPResult:
    """Solve ``max c.x  s.t.  A x <= b, x >= 0`` for ``b >= 0``.

    Pricing is Dantzig's largest-coefficient rule; after a long run of
    degenerate pivots it falls back to Bland's smallest-index rule, which
    cannot cycle.  On termination the basis is re-factorised from the
    original data and re-priced, so round-off accumulated in the tableau
    never leaks into the reported solution.
    """
    return SimplexLP(c, A, b, tol).solve()
