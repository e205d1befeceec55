import math

import pytest

from deptree.errors import CycleError, GroupStraddleError, ModelError, ModelSyntaxError, ValidationErrors
from deptree.model import BasicEvent, dumps, extract_subtree, load_model, parse_model

from helpers import TWO_TRAIN_GATES, load_json, model_from

ALL_MODELS = ["load_share.json", "load_share_pn.json", "event_tree.json", "standby.json"]


def fixed_events(n=7):
    return {f"X{i}": {"probability": 0.1} for i in range(1, n + 1)}


def errors_of(data):
    with pytest.raises(ValidationErrors) as info:
        model_from(data)
    return info.value.errors


@pytest.mark.parametrize("name", ALL_MODELS)
def test_shipped_models_load_and_round_trip(models_dir, name):
    model = load_model(models_dir / name)
    again = parse_model(dumps(model))
    assert dumps(again) == dumps(model)


def test_cycle_is_named():
    gates = {"A": {"type": "OR", "inputs": ["B", "X1"]}, "B": {"type": "AND", "inputs": ["A", "X2"]}}
    errs = errors_of({"basic_events": fixed_events(2), "fault_trees": {"T": {"root": "A", "gates": gates}}})
    cycle = [e for e in errs if isinstance(e, CycleError)]
    assert cycle and set(cycle[0].cycle) >= {"A", "B"}
    assert "A -> B -> A" in str(cycle[0]) or "B -> A -> B" in str(cycle[0])


def test_event_in_two_groups():
    data = {
        "basic_events": fixed_events(3),
        "fault_trees": {"T": {"root": "G", "gates": {"G": {"type": "OR", "inputs": ["X1", "X2", "X3"]}}}},
        "dependency_groups": {
            "DG1": {"members": ["X1", "X2"], "table": {"probs": [0.25] * 4}},
            "DG2": {"members": ["X2", "X3"], "table": {"probs": [0.25] * 4}},
        },
    }
    errs = errors_of(data)
    assert any("multiple dependency groups" in e.message and "X2" in e.message for e in errs)


def test_dangling_reference_and_unreachable_gate():
    gates = dict(TWO_TRAIN_GATES)
    gates["G1"] = {"type": "AND", "inputs": ["G2", "G9"]}
    errs = errors_of({"basic_events": fixed_events(), "fault_trees": {"T": {"root": "G0", "gates": gates}}})
    assert any("dangling" in e.message and e.location == "/fault_trees/T/gates/G1" for e in errs)

    gates = dict(TWO_TRAIN_GATES)
    gates["G9"] = {"type": "OR", "inputs": ["X1"]}
    errs = errors_of({"basic_events": fixed_events(), "fault_trees": {"T": {"root": "G0", "gates": gates}}})
    assert any("unreachable" in e.message for e in errs)


def test_voting_gate_gets_a_hint():
    gates = {"G": {"type": "VOTING", "inputs": ["X1", "X2", "X3"]}}
    errs = errors_of({"basic_events": fixed_events(3), "fault_trees": {"T": {"root": "G", "gates": gates}}})
    assert any("expanded into AND/OR" in e.message for e in errs)


def test_all_errors_reported_together():
    gates = {"G": {"type": "OR", "inputs": ["X1", "Y"]}}
    data = {
        "basic_events": {"X1": {"probability": 1.5}, "X2": {"failure_rate": 0.1, "probability": 0.2}},
        "fault_trees": {"T": {"root": "G", "gates": gates}},
    }
    assert len(errors_of(data)) >= 3


def test_schema_error_has_location():
    errs = errors_of({"basic_events": {"X1": {"probability": "high"}}, "fault_trees": {}})
    assert errs[0].location.startswith("/basic_events/X1")


def test_syntax_error_reports_line_and_column():
    with pytest.raises(ModelSyntaxError) as info:
        parse_model('{\n  "basic_events": {,\n}')
    assert info.value.line == 2
    assert info.value.column > 1


def test_missing_failure_model():
    gates = {"G": {"type": "OR", "inputs": ["X1", "X2"]}}
    errs = errors_of({"basic_events": {"X1": {"probability": 0.1}, "X2": {}},
                      "fault_trees": {"T": {"root": "G", "gates": gates}}})
    assert any("no failure model" in e.message for e in errs)


def test_grid_must_end_at_mission():
    data = {"basic_events": fixed_events(), "fault_trees": {"T": {"root": "G0", "gates": TWO_TRAIN_GATES}},
            "time_grid": [1.0, 2.0], "mission_time": 5.0}
    assert any("mission" in e.message for e in errors_of(data))


def test_subtree_straddle(models_dir):
    ft = load_model(models_dir / "load_share.json").fault_tree("G0")
    with pytest.raises(GroupStraddleError, match="DG1"):
        extract_subtree(ft, "G3")
    assert extract_subtree(ft, "G0") is ft
    with pytest.raises(ModelError):
        extract_subtree(ft, "nope")


def test_subtree_keeps_inner_groups():
    data = {
        "basic_events": fixed_events(),
        "fault_trees": {"T": {"root": "G0", "gates": TWO_TRAIN_GATES}},
        "dependency_groups": {"DG1": {"members": ["X2", "X5"], "table": {"probs": [0.8, 0.05, 0.05, 0.1]}}},
    }
    ft = model_from(data).fault_tree("T")
    sub = extract_subtree(ft, "G1")
    assert sub.root == "G1"
    assert "DG1" in sub.groups
    assert "X1" not in sub.events


def test_basic_event_formulas():
    lam, nu, t = 0.01, 0.2, 30.0
    rep = BasicEvent("A", failure_rate=lam, repair_rate=nu)
    assert rep.unavailability() == pytest.approx(lam / (lam + nu))
    assert rep.unavailability(t) == pytest.approx(lam / (lam + nu) * (1 - math.exp(-(lam + nu) * t)))
    assert rep.intensity() == pytest.approx(lam * nu / (lam + nu))
    once = BasicEvent("B", failure_rate=lam)
    assert once.unavailability(t) == pytest.approx(1 - math.exp(-lam * t))
    assert once.intensity(t) == pytest.approx(lam * math.exp(-lam * t))
    with pytest.raises(ModelError):
        once.unavailability()
    assert BasicEvent("C", probability=0.3, frequency=0.01).intensity() == 0.01


def test_event_tree_partition_checked():
    data = load_json("event_tree.json")
    data["event_trees"]["T0"]["sequences"].pop()
    errs = errors_of(data)
    assert any(e.location and e.location.startswith("/event_trees/T0") for e in errs)
