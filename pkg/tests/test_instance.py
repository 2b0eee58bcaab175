import json

import numpy as np
import pytest

from stomatch.instance import (BOT, GENERAL, VERTEX_WEIGHTED, ValidationError,
                               gen_random_instance, gen_structured_instance, instance_from_dict,
                               instance_to_dict, load_instance, save_instance, with_vertex_weights)

from conftest import make


def test_roundtrip(tmp_path):
    inst = gen_random_instance(6, 4, density=0.6, mode=GENERAL, weight_range=(1, 5), seed=3)
    save_instance(inst, tmp_path / "i.json")
    again = load_instance(tmp_path / "i.json")
    assert instance_to_dict(again) == instance_to_dict(inst)


def test_random_is_deterministic_and_has_edges():
    a = gen_random_instance(8, 5, density=0.1, seed=11)
    b = gen_random_instance(8, 5, density=0.1, seed=11)
    assert instance_to_dict(a) == instance_to_dict(b)
    assert all(t.edges for t in a.types)
    assert all(0.5 <= t.rate <= 2.0 for t in a.types)


def test_vertex_weighted_generation_consistent():
    inst = gen_random_instance(5, 5, mode=VERTEX_WEIGHTED, weight_range=(1, 10), seed=2)
    w = {v.id: v.weight for v in inst.offline}
    for t in inst.types:
        for j, wij in t.edges.items():
            assert wij == w[j]


def test_structured_families():
    cu = gen_structured_instance("complete_uniform", 3, 4)
    assert len(cu.types) == 3 and len(cu.offline) == 4
    assert cu.total_rate == 3.0
    st = gen_structured_instance("star", 1)
    assert st.total_rate == 1.0 and st.offline_ids == ["j1"]
    tc = gen_structured_instance("two_cycle", 3)
    assert all(len(t.edges) == 2 for t in tc.types)
    with pytest.raises(ValueError):
        gen_structured_instance("wheel", 3)


def test_weight_matrix():
    inst = make({"a": (1.0, {"x": 2.0}), "b": (0.5, {"y": 3.0, "x": 1.0})}, ["x", "y"], mode=GENERAL)
    np.testing.assert_array_equal(inst.weight_matrix(), [[2.0, 0.0], [1.0, 3.0]])


@pytest.mark.parametrize("bad, fragment", [
    ({"mode": "unweighted", "offline": [{"id": "j", "weight": 1}],
      "types": [{"id": "i", "rate": 0, "edges": {"j": 1}}]}, "rate must be positive"),
    ({"mode": "unweighted", "offline": [{"id": "j", "weight": 1}],
      "types": [{"id": "i", "rate": 1, "edges": {"k": 1}}]}, "unknown offline vertex"),
    ({"mode": "unweighted", "offline": [{"id": "j", "weight": 2}],
      "types": []}, "requires weight 1"),
    ({"mode": "vertex_weighted", "offline": [{"id": "j", "weight": 2}],
      "types": [{"id": "i", "rate": 1, "edges": {"j": 3}}]}, "vertex_weighted"),
    ({"mode": "unweighted", "offline": [{"id": BOT, "weight": 1}], "types": []}, "reserved"),
    ({"mode": "unweighted", "offline": [], "types": [], "extra": 1}, "unknown key"),
    ({"mode": "unweighted", "offline": [{"id": "j", "weight": 1}, {"id": "j", "weight": 1}],
      "types": []}, "duplicate"),
])
def test_validation_errors(bad, fragment):
    with pytest.raises(ValidationError, match=fragment):
        instance_from_dict(bad)


def test_parse_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ValidationError, match="parse error"):
        load_instance(p)


def test_with_vertex_weights():
    inst = with_vertex_weights(gen_structured_instance("complete_uniform", 2, 3), (1, 10), seed=4)
    assert inst.mode == VERTEX_WEIGHTED
    assert all(1 <= v.weight <= 10 for v in inst.offline)
    json.dumps(instance_to_dict(inst))
