import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deptree.errors import ModelError, NullEventError
from deptree.joint import (
    JointTable,
    check_d_separation,
    condition,
    from_marginals,
    independence_gap,
    marginalize,
    state_bits,
    state_index,
)
from deptree.markov import MarkovModel, mm_to_joint


def ab_table():
    # (~A,~B), (~A,B), (A,~B), (A,B)
    return JointTable(("A", "B"), [0.7, 0.1, 0.05, 0.15])


def test_state_order_member0_most_significant():
    assert state_index([True, False]) == 2
    assert state_bits(2, 2) == (True, False)
    assert ab_table().probability({"A": True, "B": False}) == pytest.approx(0.05)


def test_marginalize_sums_joint_entries():
    t = ab_table()
    qa = marginalize(t, ["A"])
    assert qa.probs[1] == pytest.approx(0.15 + 0.05)


def test_condition_divides_by_evidence_mass():
    t = ab_table()
    c = condition(t, {"A": True})
    assert c.members == ("B",)
    assert c.probs[0] == pytest.approx(0.05 / 0.2)


def test_condition_on_null_event():
    t = JointTable(("A", "B"), [0.5, 0.5, 0.0, 0.0])
    with pytest.raises(NullEventError):
        condition(t, {"A": True})


def test_condition_on_all_members_leaves_empty_table():
    c = condition(ab_table(), {"A": True, "B": True})
    assert c.members == ()
    assert c.probs.tolist() == [1.0]


def test_normalization_tolerance():
    t = JointTable(("A",), [0.3, 0.7 + 5e-10])
    assert t.probs.sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ModelError):
        JointTable(("A",), [0.3, 0.71])


@pytest.mark.parametrize(
    "members, probs",
    [(("A", "B"), [0.5, 0.5]), (("A",), [-0.1, 1.1]), (("A", "A"), [0.25] * 4), (("A",), [np.nan, 1.0])],
)
def test_invalid_tables(members, probs):
    with pytest.raises(ModelError):
        JointTable(members, probs)


def test_member_cap():
    with pytest.raises(ModelError, match="cap"):
        JointTable(tuple(f"E{i}" for i in range(3)), np.full(8, 1 / 8), max_members=2)


def test_single_member_flows_from_freqs():
    t = JointTable(("A",), [0.9, 0.1], freqs=[0.02, 0.02])
    assert t.flows.tolist() == [[0.0, 0.02], [0.02, 0.0]]


def test_marginalize_reorders_members():
    t = JointTable(("A", "B", "C"), np.arange(1, 9) / 36.0)
    ca = marginalize(t, ["C", "A"])
    assert ca.members == ("C", "A")
    assert ca.probability({"C": True, "A": False}) == pytest.approx(t.probability({"C": True, "A": False}))


def _load_share_like():
    # X1 fails faster when X2 is down
    states = ("00", "01", "10", "11")
    members = ("X1", "X2")
    smap = {"00": (), "01": ("X2",), "10": ("X1",), "11": ("X1", "X2")}
    trans = (
        ("00", "10", 0.01), ("00", "01", 0.03), ("01", "11", 0.08), ("01", "00", 0.4),
        ("10", "00", 0.3), ("10", "11", 0.03), ("11", "01", 0.3), ("11", "10", 0.4),
    )
    return MarkovModel(states, trans, members, smap, "00")


def test_marginalized_flows_match_direct_lumping():
    t = mm_to_joint(_load_share_like())
    x1 = marginalize(t, ["X1"])
    p = t.probs
    # X1 goes up -> down from 00 (rate 0.01) and from 01 (rate 0.08)
    assert x1.flows[0, 1] == pytest.approx(p[0] * 0.01 + p[1] * 0.08)
    assert x1.flows[1, 0] == pytest.approx(p[2] * 0.3 + p[3] * 0.3)
    assert x1.freqs.tolist() == pytest.approx(x1.flows.sum(axis=0).tolist())
    # in steady state entries and exits balance
    assert x1.flows[0, 1] == pytest.approx(x1.flows[1, 0])


def test_marginalize_freqs_without_flows_are_summed():
    t = JointTable(("A", "B"), [0.7, 0.1, 0.05, 0.15], freqs=[0.1, 0.2, 0.3, 0.4])
    assert marginalize(t, ["A"]).freqs.tolist() == pytest.approx([0.3, 0.7])


def test_d_separation_on_chain():
    # A <- B -> C: A and C independent given B, dependent otherwise
    pb = 0.3
    pa = {True: 0.8, False: 0.1}
    pc = {True: 0.6, False: 0.05}
    probs = []
    for i in range(8):
        b, a, c = state_bits(i, 3)
        probs.append((pb if b else 1 - pb) * (pa[b] if a else 1 - pa[b]) * (pc[b] if c else 1 - pc[b]))
    t = JointTable(("B", "A", "C"), probs)
    assert check_d_separation(t, "B", "A", "C") == {True: True, False: True}
    assert independence_gap(t, "A", "C") > 1e-3


def test_d_separation_detects_direct_coupling():
    t = JointTable(("B", "A", "C"), [0.4, 0.0, 0.0, 0.1, 0.1, 0.1, 0.1, 0.2])
    result = check_d_separation(t, "B", "A", "C")
    assert result[False] is False


def test_d_separation_null_state():
    t = JointTable(("B", "A", "C"), [0.25, 0.25, 0.25, 0.25, 0, 0, 0, 0])
    assert check_d_separation(t, "B", "A", "C")[True] is None


def test_from_marginals_is_product():
    t = from_marginals({"A": 0.2, "B": 0.5})
    assert t.probs.tolist() == pytest.approx([0.4, 0.4, 0.1, 0.1])
    assert independence_gap(t, "A", "B") < 1e-15


def test_dict_round_trip():
    t = mm_to_joint(_load_share_like())
    back = JointTable.from_dict(t.to_dict())
    assert back.allclose(t)
    assert np.allclose(back.flows, t.flows)


tables = st.integers(1, 5).flatmap(
    lambda k: st.tuples(
        st.just(k),
        st.lists(st.floats(0.0, 1.0), min_size=2**k, max_size=2**k).filter(lambda v: sum(v) > 1e-3),
        st.randoms(use_true_random=False),
    )
)


@given(tables)
@settings(max_examples=150, deadline=None)
def test_marginal_and_condition_consistency(case):
    k, raw, rnd = case
    probs = np.array(raw) / sum(raw)
    members = tuple(f"M{i}" for i in range(k))
    t = JointTable(members, probs)
    keep = rnd.sample(members, rnd.randint(1, k))
    m = marginalize(t, keep)
    assert m.probs.sum() == pytest.approx(1.0, abs=1e-12)
    ev = {x: rnd.random() < 0.5 for x in keep}
    assert m.probability(ev) == pytest.approx(t.probability(ev), abs=1e-12)
    if t.probability(ev) > 1e-12 and len(ev) < k:
        c = condition(t, ev)
        rest = {x: True for x in c.members[:1]}
        assert c.probability(rest) == pytest.approx(t.probability({**ev, **rest}) / t.probability(ev), abs=1e-9)
