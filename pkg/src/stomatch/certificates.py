"""Grid certificates for the per-vertex ratio bounds.

Each certificate evaluates a lower bound b(x) on the probability that an
offline vertex with LP marginal x is matched, and checks b(x)/x >= target on
a uniform grid over (0, 1] followed by a fine local sweep around the grid
minimum.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .analysis import BETA_DROP, EXTRA_COEF, LN2, ONE_MINUS_LN2, delta, kappa
from .quadrature import adaptive_simpson

TARGETS = {"wasteful": 0.699, "limit": 0.711, "amortized": 0.7009}
DEFAULT_STEP = 1e-4
REFINE_STEP = 1e-7
C_LIMIT = 1.0 / ONE_MINUS_LN2
# On x <= 1/2 the basic term alone gives ratio >= 2(1 - e^{-1/2}).
BASIC_FLOOR = 2.0 * (1.0 - math.exp(-0.5))


@dataclass
class RatioCertificate:
    name: str
    grid_step: float
    x: np.ndarray
    bound_value: np.ndarray
    ratio: np.ndarray
    min_ratio: float
    argmin: float
    target: float
    passed: bool
    notes: dict

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.x.tolist(), self.bound_value.tolist(), self.ratio.tolist()))

    def summary(self) -> dict:
        return {"name": self.name, "min_ratio": self.min_ratio, "argmin": self.argmin,
                "target": self.target, "passed": self.passed, "grid_step": self.grid_step,
                **self.notes}

    def write(self, directory) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"certificate_{self.name}.csv"
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "bound_value", "ratio"])
            for row in self.points:
                w.writerow([repr(v) for v in row])
        json_path = directory / f"certificate_{self.name}.json"
        json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _grid(step: float) -> np.ndarray:
    if not 0 < step <= 1e-1:
        raise ValueError(f"grid step must lie in (0, 0.1], got {step}")
    n = int(math.ceil(1.0 / step - 1e-9))
    x = np.arange(1, n + 1) * step
    x[-1] = 1.0
    return x


def _sweep(name: str, bound: Callable[[np.ndarray], np.ndarray], step: float,
           notes: dict | None = None, extra_ok: bool = True) -> RatioCertificate:
    x = _grid(step)
    values = bound(x)
    ratio = values / x
    k = int(np.argmin(ratio))
    # Refine around the coarse minimum, staying inside (0, 1].
    lo, hi = max(x[k] - step, REFINE_STEP), min(x[k] + step, 1.0)
    fine = np.linspace(lo, hi, int(round((hi - lo) / REFINE_STEP)) + 1)
    fine_ratio = bound(fine) / fine
    f = int(np.argmin(fine_ratio))
    if fine_ratio[f] < ratio[k]:
        min_ratio, argmin = float(fine_ratio[f]), float(fine[f])
    else:
        min_ratio, argmin = float(ratio[k]), float(x[k])
    target = TARGETS[name]
    return RatioCertificate(name, step, x, values, ratio, min_ratio, argmin, target,
                            bool(min_ratio >= target and extra_ok), notes or {})


def wasteful_bound(x):
    """1 - e^{-x} + (1/e)(1 - 2/e) x kappa(1, x)."""
    x = np.asarray(x, dtype=float)
    return -np.expm1(-x) + EXTRA_COEF * x * kappa(1.0, x)


def wasteful_floor() -> float:
    """Value of wasteful_bound at x = 1, the minimum of its ratio."""
    return 1.0 - math.exp(-1.0) + EXTRA_COEF * LN2


def certificate_wasteful(grid_step: float = DEFAULT_STEP) -> RatioCertificate:
    x = _grid(grid_step)
    small = x[x <= 0.5]
    basic_min = float(np.min(-np.expm1(-small) / small)) if small.size else math.inf
    ok = basic_min >= BASIC_FLOOR - 1e-15
    return _sweep("wasteful", wasteful_bound, grid_step,
                  {"basic_min_ratio": basic_min, "basic_floor": BASIC_FLOOR,
                   "floor": wasteful_floor()}, ok)


def _advanced_integrand(beta: float) -> float:
    return math.exp(-ONE_MINUS_LN2 * beta) * (math.log1p(1.0 / beta) - 1.0 / (beta + 1.0))


def limit_integral(quad_tol: float = 1e-10) -> float:
    """Integral over [1, 1/(1 - ln 2)] of e^{-(1-ln2)b} (ln((b+1)/b) - 1/(b+1)) db."""
    return adaptive_simpson(_advanced_integrand, 1.0, C_LIMIT, quad_tol).value


def limit_bound(x, integral: float):
    x = np.asarray(x, dtype=float)
    basic = -np.expm1(-x)
    full = basic + EXTRA_COEF * x * (x - 1.0 + LN2) + ONE_MINUS_LN2 / math.e * x * integral
    return np.where(x > 0.5, full, basic)


def certificate_limit(quad_tol: float = 1e-10, grid_step: float = DEFAULT_STEP) -> RatioCertificate:
    integral = limit_integral(quad_tol)
    return _sweep("limit", lambda x: limit_bound(x, integral), grid_step,
                  {"integral": integral, "c": C_LIMIT, "quad_tol": quad_tol})


def amortized_bound(x, beta_drop: float = BETA_DROP):
    """1 - exp(-(1 - delta(x)) x - beta kappa(1, x))."""
    x = np.asarray(x, dtype=float)
    return -np.expm1(-(1.0 - delta(x, beta_drop)) * x - beta_drop * kappa(1.0, x))


def certificate_amortized(beta_drop: float = BETA_DROP, grid_step: float = DEFAULT_STEP) -> RatioCertificate:
    return _sweep("amortized", lambda x: amortized_bound(x, beta_drop), grid_step,
                  {"beta_drop": beta_drop, "g_at_1": float(amortized_bound(1.0, beta_drop))})
