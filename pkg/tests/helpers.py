"""Small model builders shared by the tests."""

import json

from deptree.model import build_model

from conftest import MODELS

TWO_TRAIN_GATES = {
    "G0": {"type": "OR", "inputs": ["X1", "G1"]},
    "G1": {"type": "AND", "inputs": ["G2", "G3"]},
    "G2": {"type": "OR", "inputs": ["X2", "X3", "X4"]},
    "G3": {"type": "OR", "inputs": ["X5", "X6", "X7"]},
}
K0_GATES = {
    "K0": {"type": "AND", "inputs": ["X1", "K1"]},
    "K1": {"type": "OR", "inputs": ["X2", "K2"]},
    "K2": {"type": "AND", "inputs": ["X8", "X9", "X10"]},
}


def load_json(name):
    return json.loads((MODELS / name).read_text())


def model_from(data):
    return build_model(json.loads(json.dumps(data)))


def two_train_fixed(probs):
    """X1 OR (two redundant trains), every event a fixed probability."""
    return model_from(
        {
            "basic_events": {e: {"probability": q} for e, q in probs.items()},
            "fault_trees": {"G0": {"root": "G0", "gates": TWO_TRAIN_GATES}},
        }
    )


def two_train_rates(rates, grid=None, mission=None):
    """The two-train tree with constant-rate events; ``rates`` maps id -> (lambda, nu or None)."""
    events = {}
    for e, (lam, nu) in rates.items():
        events[e] = {"failure_rate": lam} if nu is None else {"failure_rate": lam, "repair_rate": nu}
    data = {"basic_events": events, "fault_trees": {"G0": {"root": "G0", "gates": TWO_TRAIN_GATES}}}
    if grid is not None:
        data["time_grid"] = list(grid)
    if mission is not None:
        data["mission_time"] = mission
    return model_from(data)


def g0_k0_fixed(probs):
    return model_from(
        {
            "basic_events": {e: {"probability": q} for e, q in probs.items()},
            "fault_trees": {"G0": {"root": "G0", "gates": TWO_TRAIN_GATES}, "K0": {"root": "K0", "gates": K0_GATES}},
        }
    )
