"""Problem instances: online types with arrival rates, weighted offline vertices."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

UNWEIGHTED = "unweighted"
VERTEX_WEIGHTED = "vertex_weighted"
GENERAL = "general"
MODES = (UNWEIGHTED, VERTEX_WEIGHTED, GENERAL)

# Reserved name for the dummy offline vertex in pair distributions and exports.
BOT = "_bot"


class ValidationError(ValueError):
    """Raised when an instance violates one of its invariants."""


@dataclass(frozen=True)
class OnlineType:
    id: str
    rate: float
    edges: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class OfflineVertex:
    id: str
    weight: float = 1.0


@dataclass(frozen=True)
class Instance:
    types: tuple[OnlineType, ...]
    offline: tuple[OfflineVertex, ...]
    mode: str = UNWEIGHTED

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "offline", tuple(self.offline))
        validate(self)

    @property
    def total_rate(self) -> float:
        return math.fsum(t.rate for t in self.types)

    @property
    def type_ids(self) -> list[str]:
        return [t.id for t in self.types]

    @property
    def offline_ids(self) -> list[str]:
        return [v.id for v in self.offline]

    def type_by_id(self, type_id: str) -> OnlineType:
        for t in self.types:
            if t.id == type_id:
                return t
        raise KeyError(f"unknown online type {type_id!r}")

    def edge_list(self) -> list[tuple[str, str, float]]:
        """All (type-id, offline-id, weight) triples in type order, then edge order."""
        return [(t.id, j, w) for t in self.types for j, w in t.edges.items()]

    def weight_matrix(self) -> np.ndarray:
        """Dense |I| x |J| matrix of w_ij (0 for missing edges)."""
        col = {j: c for c, j in enumerate(self.offline_ids)}
        w = np.zeros((len(self.types), len(self.offline)))
        for r, t in enumerate(self.types):
            for j, wij in t.edges.items():
                w[r, col[j]] = wij
        return w


def _check_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{where}: must be finite, got {value!r}")
    return value


def _check_id(value, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValidationError(f"{where}: id must be a nonempty string, got {value!r}")
    if value == BOT:
        raise ValidationError(f"{where}: id {BOT!r} is reserved for the dummy vertex")
    return value


def validate(inst: Instance) -> None:
    if inst.mode not in MODES:
        raise ValidationError(f"mode: expected one of {MODES}, got {inst.mode!r}")

    weights = {}
    for n, v in enumerate(inst.offline):
        vid = _check_id(v.id, f"offline[{n}].id")
        if vid in weights:
            raise ValidationError(f"offline[{n}].id: duplicate offline id {vid!r}")
        w = _check_number(v.weight, f"offline[{n}].weight (id {vid!r})")
        if w < 0:
            raise ValidationError(f"offline[{n}].weight (id {vid!r}): negative weight {w}")
        if inst.mode == UNWEIGHTED and w != 1.0:
            raise ValidationError(
                f"offline[{n}].weight (id {vid!r}): unweighted mode requires weight 1, got {w}")
        weights[vid] = w

    seen = set()
    for n, t in enumerate(inst.types):
        tid = _check_id(t.id, f"types[{n}].id")
        if tid in seen:
            raise ValidationError(f"types[{n}].id: duplicate type id {tid!r}")
        seen.add(tid)
        rate = _check_number(t.rate, f"types[{n}].rate (id {tid!r})")
        if rate <= 0:
            raise ValidationError(f"types[{n}].rate (id {tid!r}): rate must be positive, got {rate}")
        if not isinstance(t.edges, Mapping):
            raise ValidationError(f"types[{n}].edges (id {tid!r}): expected a mapping")
        for j, w in t.edges.items():
            where = f"types[{n}].edges[{j!r}] (id {tid!r})"
            if j not in weights:
                raise ValidationError(f"{where}: unknown offline vertex {j!r}")
            w = _check_number(w, where)
            if w < 0:
                raise ValidationError(f"{where}: negative edge weight {w}")
            if inst.mode == UNWEIGHTED and w not in (0.0, 1.0):
                raise ValidationError(f"{where}: unweighted mode requires weight 0 or 1, got {w}")
            if inst.mode == VERTEX_WEIGHTED and w not in (0.0, weights[j]):
                raise ValidationError(
                    f"{where}: vertex_weighted mode requires weight 0 or w_j={weights[j]}, got {w}")


# -- file I/O ---------------------------------------------------------------

_TOP_KEYS = {"mode", "offline", "types"}
_OFFLINE_KEYS = {"id", "weight"}
_TYPE_KEYS = {"id", "rate", "edges"}


def _reject_unknown(obj, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: expected a JSON object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ValidationError(f"{where}: unknown key(s) {extra}")
    missing = sorted(allowed - set(obj))
    if missing:
        raise ValidationError(f"{where}: missing key(s) {missing}")


def instance_from_dict(data) -> Instance:
    _reject_unknown(data, _TOP_KEYS, "instance")
    if not isinstance(data["offline"], list):
        raise ValidationError("offline: expected a list")
    if not isinstance(data["types"], list):
        raise ValidationError("types: expected a list")
    offline = []
    for n, v in enumerate(data["offline"]):
        _reject_unknown(v, _OFFLINE_KEYS, f"offline[{n}]")
        offline.append(OfflineVertex(v["id"], v["weight"]))
    types = []
    for n, t in enumerate(data["types"]):
        _reject_unknown(t, _TYPE_KEYS, f"types[{n}]")
        if not isinstance(t["edges"], dict):
            raise ValidationError(f"types[{n}].edges: expected a JSON object")
        types.append(OnlineType(t["id"], t["rate"], dict(t["edges"])))
    return Instance(tuple(types), tuple(offline), data["mode"])


def instance_to_dict(inst: Instance) -> dict:
    return {
        "mode": inst.mode,
        "offline": [{"id": v.id, "weight": v.weight} for v in inst.offline],
        "types": [{"id": t.id, "rate": t.rate, "edges": dict(t.edges)} for t in inst.types],
    }


def load_instance(path) -> Instance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"parse error in {path}: {exc}") from exc
    return instance_from_dict(data)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n")


# -- generators -------------------------------------------------------------

def _ids(prefix: str, n: int) -> list[str]:
    width = len(str(n))
    return [f"{prefix}{k:0{width}d}" for k in range(1, n + 1)]


def gen_random_instance(n_types: int, n_offline: int, density: float = 0.5,
                        rate_range=(0.5, 2.0), weight_range=(1.0, 1.0),
                        mode: str = UNWEIGHTED, seed: int = 0) -> Instance:
    """Random bipartite market; deterministic in ``seed``.

    Each potential edge is present independently with probability ``density``;
    a type that ends up with no edges has its row resampled.  Vertex weights
    (vertex_weighted) or edge weights (general) are uniform in ``weight_range``.
    """
    if n_types < 1 or n_offline < 1:
        raise ValueError("n_types and n_offline must be positive")
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    for name, (lo, hi) in (("rate_range", rate_range), ("weight_range", weight_range)):
        if not 0 < lo <= hi:
            raise ValueError(f"{name} must satisfy 0 < lo <= hi, got {(lo, hi)}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")

    rng = np.random.default_rng(seed)
    tids, jids = _ids("i", n_types), _ids("j", n_offline)
    rates = rng.uniform(rate_range[0], rate_range[1], size=n_types)
    if mode == VERTEX_WEIGHTED:
        vweights = rng.uniform(weight_range[0], weight_range[1], size=n_offline)
    else:
        vweights = np.ones(n_offline)

    types = []
    for r in range(n_types):
        mask = rng.random(n_offline) < density
        while not mask.any():
            mask = rng.random(n_offline) < density
        if mode == GENERAL:
            w = rng.uniform(weight_range[0], weight_range[1], size=n_offline)
        else:
            w = vweights
        edges = {jids[c]: float(w[c]) for c in np.flatnonzero(mask)}
        types.append(OnlineType(tids[r], float(rates[r]), edges))
    offline = [OfflineVertex(j, float(w)) for j, w in zip(jids, vweights)]
    return Instance(tuple(types), tuple(offline), mode)


def gen_structured_instance(family: str, *size: int) -> Instance:
    """Unweighted test families: complete_uniform(n, m), star(m), two_cycle(n)."""
    if any(s < 1 for s in size):
        raise ValueError(f"size parameters must be positive, got {size}")
    if family == "complete_uniform":
        n, m = size
        jids = _ids("j", m)
        types = [OnlineType(i, 1.0, {j: 1.0 for j in jids}) for i in _ids("i", n)]
    elif family == "star":
        (m,) = size
        jids = _ids("j", m)
        types = [OnlineType(_ids("i", 1)[0], 1.0, {j: 1.0 for j in jids})]
    elif family == "two_cycle":
        (n,) = size
        jids = _ids("j", n)
        types = [OnlineType(i, 1.0, {jids[r]: 1.0, jids[(r + 1) % n]: 1.0})
                 for r, i in enumerate(_ids("i", n))]
    else:
        raise ValueError(f"unknown instance family {family!r}")
    return Instance(tuple(types), tuple(OfflineVertex(j) for j in jids), UNWEIGHTED)


def with_vertex_weights(inst: Instance, weight_range=(1.0, 10.0), seed: int = 0) -> Instance:
    """Vertex-weighted copy of ``inst`` with w_j uniform in ``weight_range``."""
    rng = np.random.default_rng(seed)
    w = dict(zip(inst.offline_ids, rng.uniform(weight_range[0], weight_range[1],
                                               size=len(inst.offline)).tolist()))
    types = tuple(OnlineType(t.id, t.rate, {j: (w[j] if wij > 0 else 0.0)
                                            for j, wij in t.edges.items()})
                  for t in inst.types)
    offline = tuple(OfflineVertex(j, w[j]) for j in inst.offline_ids)
    return Instance(types, offline, VERTEX_WEIGHTED)
