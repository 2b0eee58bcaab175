import pytest

from stomatch.instance import instance_from_dict


def make(types, offline, mode="unweighted", weights=None):
    """Build an instance from {type: (rate, [offline ids] or {id: w})}."""
    weights = weights or {}
    off = [{"id": j, "weight": weights.get(j, 1.0)} for j in offline]
    tys = []
    for tid, (rate, edges) in types.items():
        if not isinstance(edges, dict):
            edges = {j: weights.get(j, 1.0) for j in edges}
        tys.append({"id": tid, "rate": rate, "edges": edges})
    return instance_from_dict({"mode": mode, "offline": off, "types": tys})


@pytest.fixture
def star_75_25():
    """Single offline vertex, two types with rates 0.75 and 0.25."""
    return make({"i1": (0.75, ["j"]), "i2": (0.25, ["j"])}, ["j"])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
