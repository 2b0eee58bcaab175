"""Maximum-weight bipartite matching by successive shortest augmenting paths.

Rows are inserted one at a time; each insertion runs a Dijkstra-like search
over reduced costs (the Hungarian method with potentials) and augments along
the cheapest path.  Every row also owns a private zero-cost dummy column, so
leaving a row unmatched is always an option and the result is a maximum
weight matching rather than a maximum-cardinality one.
"""

from __future__ import annotations

import numpy as np


def max_weight_matching(weights) -> tuple[float, np.ndarray]:
    """Return (total weight, col) where col[r] is the column matched to row r or -1.

    ``weights`` is an (n, m) array of nonnegative edge weights; a zero entry
    is the same as a missing edge.  Ties are resolved deterministically: rows
    are inserted in index order, a new row is left unmatched rather than
    displacing an earlier row at equal weight, and the lowest column index
    wins every other comparison.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise ValueError("weights must be a 2-D array")
    n, m = w.shape
    if n == 0 or m == 0:
        return 0.0, np.full(n, -1, dtype=int)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")

    # Columns 1..n are the per-row dummies (row r owns column n + 1 - r) and
    # n+1..n+m the real columns.  Dummies come first, newest row first, so on
    # ties a newly inserted row stays unmatched rather than displacing an
    # earlier row.
    cols = m + n
    cost = np.zeros((n + 1, cols + 1))
    cost[1:, n + 1:] = -w
    # Row r may only use its own dummy column; the others are forbidden.
    big = 1.0 + 2.0 * float(w.sum())
    cost[1:, 1:n + 1] = big
    cost[np.arange(1, n + 1), n + 1 - np.arange(1, n + 1)] = 0.0

    u = np.zeros(n + 1)
    v = np.zeros(cols + 1)
    p = np.zeros(cols + 1, dtype=int)       # p[c] = row matched to column c (0 = none)
    way = np.zeros(cols + 1, dtype=int)
    for row in range(1, n + 1):
        p[0] = row
        j0 = 0
        minv = np.full(cols + 1, np.inf)
        used = np.zeros(cols + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = cost[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            step = cand[j1]
            u[p[used]] += step
            v[used] -= step
            minv[free] -= step
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    col = np.full(n, -1, dtype=int)
    for c in range(m):
        r = p[n + 1 + c]
        if r and w[r - 1, c] > 0.0:
            col[r - 1] = c
    total = float(sum(w[r, c] for r, c in enumerate(col) if c >= 0))
    return total, col
