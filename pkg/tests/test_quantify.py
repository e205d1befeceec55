import numpy as np
import pytest

from deptree.analysis import group_table, measure_for
from deptree.bdd import build_bdd
from deptree.errors import MissingDataError, ModelError, NullEventError, UnsupportedError
from deptree.joint import JointTable
from deptree.model import load_model
from deptree.quantify import (
    EventMeasure,
    birnbaum,
    conditional_given,
    joint_with,
    path_table,
    top_frequency,
    top_frequency_independent,
    top_probability,
)

from helpers import two_train_fixed, two_train_rates
from oracles import Enumeration, ctmc_frequency, group_generator

RATES = {"X1": (0.001, 0.1), "X2": (0.03, 0.4), "X3": (0.002, 0.1), "X4": (0.001, 0.05),
         "X5": (0.02, 0.5), "X6": (0.004, 0.2), "X7": (0.001, 0.02)}


def test_independent_probability_matches_product_form():
    q = {f"X{i}": 0.05 * i for i in range(1, 8)}
    ft = two_train_fixed(q).fault_tree("G0")
    g2 = 1 - (1 - q["X2"]) * (1 - q["X3"]) * (1 - q["X4"])
    g3 = 1 - (1 - q["X5"]) * (1 - q["X6"]) * (1 - q["X7"])
    expected = 1 - (1 - q["X1"]) * (1 - g2 * g3)
    assert top_probability(build_bdd(ft), marginals=q) == pytest.approx(expected, abs=1e-15)


def test_birnbaum_for_or_gate():
    ft = two_train_fixed({f"X{i}": 0.1 for i in range(1, 8)}).fault_tree("G0")
    bdd = build_bdd(ft)
    q = {f"X{i}": 0.1 for i in range(1, 8)}
    imp = birnbaum(bdd, q)
    g2 = 1 - 0.9**3
    assert imp["X1"] == pytest.approx(1 - g2 * g2)


def test_independent_frequency_matches_markov_product_chain():
    model = two_train_rates(RATES)
    bdd = build_bdd(model.fault_tree("G0"))
    q = {e: model.basic_events[e].unavailability() for e in RATES}
    w = {e: model.basic_events[e].intensity() for e in RATES}
    q_ref, w_ref = ctmc_frequency(model.fault_tree("G0"), RATES)
    assert top_probability(bdd, marginals=q) == pytest.approx(q_ref, rel=1e-12)
    assert top_frequency_independent(bdd, q, w) == pytest.approx(w_ref, rel=1e-12)
    assert top_frequency(bdd, marginals=q, intensities=w) == pytest.approx(w_ref, rel=1e-12)


def test_group_frequency_matches_markov_product_chain(models_dir):
    model = load_model(models_dir / "load_share.json")
    ft = model.fault_tree("G0")
    bdd = build_bdd(ft)
    mm = model.markov_models["MM_load_share"]
    others = {"X3": (0.002, 0.1), "X4": (0.001, 0.05), "X6": (0.004, 0.2), "X7": (0.001, 0.02)}
    table = group_table(model, "DG1")
    q = {e: r[0] / (r[0] + r[1]) for e, r in others.items()}
    w = {e: r[0] * r[1] / (r[0] + r[1]) for e, r in others.items()}
    q_ref, w_ref = ctmc_frequency(ft, others, group_generator(mm))
    measure = EventMeasure({"DG1": table}, q)
    assert top_probability(bdd, measure) == pytest.approx(q_ref, rel=1e-10)
    assert top_frequency(bdd, measure, intensities=w) == pytest.approx(w_ref, rel=1e-10)


def test_group_frequency_needs_flows():
    table = JointTable(("X1", "X2"), [0.9, 0.04, 0.04, 0.02], freqs=[0.01, 0.02, 0.02, 0.01])
    ft = two_train_fixed({f"X{i}": 0.1 for i in range(1, 8)}).fault_tree("G0")
    bdd = build_bdd(ft)
    q = {f"X{i}": 0.1 for i in range(3, 8)}
    with pytest.raises(UnsupportedError, match="group frequency source required"):
        top_frequency(bdd, [table], q, {e: 0.001 for e in q})


def test_missing_marginal():
    ft = two_train_fixed({f"X{i}": 0.1 for i in range(1, 8)}).fault_tree("G0")
    with pytest.raises(MissingDataError):
        top_probability(build_bdd(ft), marginals={"X1": 0.1})


def test_event_in_two_tables_rejected():
    a = JointTable(("X1", "X2"), [0.25] * 4)
    b = JointTable(("X2", "X3"), [0.25] * 4)
    with pytest.raises(ModelError, match="multiple dependency groups"):
        EventMeasure([a, b])


def test_joint_and_conditional_against_enumeration(models_dir):
    model = load_model(models_dir / "load_share.json")
    ft = model.fault_tree("G0")
    bdd = build_bdd(ft)
    measure = measure_for(model, bdd.order)
    table = group_table(model, "DG1")
    marg = {e: q for e, q in measure.marginals.items()}
    truth = Enumeration(ft, marg, [table])
    for lits in ({"X2": True}, {"X2": False, "X5": True}, {"X3": True, "X1": False}):
        assert joint_with(bdd, lits, measure) == pytest.approx(truth.probability(lits), abs=1e-15)
        assert conditional_given(bdd, lits, measure) == pytest.approx(truth.conditional(lits), abs=1e-14)


def test_conditioning_on_impossible_literal():
    ft = two_train_fixed({f"X{i}": 0.1 for i in range(1, 8)}).fault_tree("G0")
    q = {f"X{i}": 0.1 for i in range(1, 8)}
    q["X3"] = 0.0
    with pytest.raises(NullEventError):
        conditional_given(build_bdd(ft), {"X3": True}, marginals=q)


def test_path_table_factors_multiply_to_path_probability(models_dir):
    model = load_model(models_dir / "load_share.json")
    bdd = build_bdd(model.fault_tree("G0"))
    measure = measure_for(model, bdd.order)
    rows = path_table(bdd, measure)
    for r in rows:
        prod = np.prod([f["value"] for f in r["factors"].values()])
        assert prod == pytest.approx(r["probability"], rel=1e-15)
    assert sum(r["probability"] for r in rows) == pytest.approx(top_probability(bdd, measure), abs=1e-15)
