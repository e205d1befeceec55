"""Event trees whose branch fault trees share components.

Shared components ("sources") are instantiated one state at a time. Given a
source state the branch top events are conditionally independent, so a
sequence probability is the source-state-weighted sum of products of
conditional branch probabilities:

    P(seq) = sum_s q(s) * prod_b q(b = outcome_b | s)

Source states are numbered by binary counting with the first source as the
most significant bit and bit value 1 meaning "occurred".
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .bdd import Bdd
from .errors import ModelError, NullEventError, OrderingError
from .joint import JointTable, state_bits
from .model import EventTree
from .quantify import EventMeasure, conditional_given

MAX_SOURCES = 16


def source_states(sources: Sequence[str]) -> list[dict[str, bool]]:
    k = len(sources)
    return [dict(zip(sources, state_bits(i, k))) for i in range(2**k)]


def state_label(state: Mapping[str, bool]) -> str:
    return " ".join(e if v else "~" + e for e, v in state.items())


@dataclass(frozen=True)
class ConditionalVector:
    """q(TOP | s) for every source state s; NaN where q(s) = 0."""

    top: str
    sources: tuple[str, ...]
    entries: np.ndarray
    possible: np.ndarray

    def complement(self) -> np.ndarray:
        return 1.0 - self.entries

    def to_dict(self) -> dict:
        return {
            "top": self.top,
            "sources": list(self.sources),
            "states": [state_label(s) for s in source_states(self.sources)],
            "entries": [None if not ok else float(v) for v, ok in zip(self.entries, self.possible)],
        }


def _check_sources(sources: Sequence[str]) -> tuple[str, ...]:
    sources = tuple(sources)
    if len(set(sources)) != len(sources):
        raise ModelError("a shared source is listed twice")
    if len(sources) > MAX_SOURCES:
        raise ModelError(f"{len(sources)} shared sources exceed the limit of {MAX_SOURCES}")
    return sources


def conditional_vector(bdd: Bdd, sources: Sequence[str], groups=(), marginals=None, top: str = "TOP") -> ConditionalVector:
    """Conditional top-event probabilities over all source states.

    Zero-probability source states are flagged in ``possible`` and get NaN.
    Sources absent from the diagram simply leave the entry at the
    (conditional) top probability.
    """
    sources = _check_sources(sources)
    measure = groups if isinstance(groups, EventMeasure) else EventMeasure(groups, marginals)
    states = source_states(sources)
    entries = np.full(len(states), np.nan)
    possible = np.zeros(len(states), dtype=bool)
    for i, s in enumerate(states):
        try:
            entries[i] = conditional_given(bdd, s, measure)
        except NullEventError:
            continue
        possible[i] = True
    return ConditionalVector(top, sources, entries, possible)


def source_weights(sources: Sequence[str], measure: EventMeasure) -> np.ndarray:
    """q(s) for every source state, from group tables or independent marginals."""
    return np.array([measure.prob(s) for s in source_states(tuple(sources))])


def joint_top_events(vec_a: ConditionalVector, vec_b: ConditionalVector, source_table: JointTable) -> dict[tuple[bool, bool], float]:
    """q(A=a, B=b) for the four outcome combinations.

    ``source_table`` is the joint distribution of the sources, with members
    in the same order as the vectors.
    """
    if vec_a.sources != vec_b.sources or tuple(source_table.members) != vec_a.sources:
        raise OrderingError(
            f"source order mismatch: {list(vec_a.sources)}, {list(vec_b.sources)}, {list(source_table.members)}"
        )
    w = np.asarray(source_table.probs, dtype=float)
    ok = (w > 0.0) & vec_a.possible & vec_b.possible
    a = np.where(ok, vec_a.entries, 0.0)
    b = np.where(ok, vec_b.entries, 0.0)
    w = np.where(ok, w, 0.0)
    return {
        (True, True): math.fsum(w * a * b),
        (True, False): math.fsum(w * a * (1.0 - b)),
        (False, True): math.fsum(w * (1.0 - a) * b),
        (False, False): math.fsum(w * (1.0 - a) * (1.0 - b)),
    }


@dataclass
class LossFrequencies:
    event_tree: str
    initiating_frequency: float
    sources: tuple[str, ...]
    frequencies: dict[str, float]
    sequences: list[dict]
    vectors: dict[str, ConditionalVector] = field(default_factory=dict)
    joints: dict[tuple[str, str], dict[tuple[bool, bool], float]] = field(default_factory=dict)
    impossible_states: list[str] = field(default_factory=list)

    @property
    def total(self) -> float:
        return math.fsum(self.frequencies.values())

    @property
    def conservation_error(self) -> float:
        """Relative gap between the summed losses and the initiating frequency."""
        if self.initiating_frequency == 0.0:
            return abs(self.total)
        return abs(self.total - self.initiating_frequency) / self.initiating_frequency

    def to_dict(self) -> dict:
        def outcome(v: bool) -> str:
            return "fail" if v else "success"

        return {
            "event_tree": self.event_tree,
            "initiating_frequency": self.initiating_frequency,
            "shared_sources": list(self.sources),
            "loss_frequencies": dict(self.frequencies),
            "total": self.total,
            "conservation_error": self.conservation_error,
            "sequences": self.sequences,
            "conditional_vectors": {k: v.to_dict() for k, v in self.vectors.items()},
            "joint_top_events": {
                f"{a}|{b}": {f"{outcome(x)},{outcome(y)}": p for (x, y), p in j.items()}
                for (a, b), j in self.joints.items()
            },
            "impossible_source_states": list(self.impossible_states),
        }


def branch_events(et: EventTree, bdds: Mapping[str, Bdd]) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    for bp in et.branch_points:
        if bp.fault_tree is not None:
            if bp.fault_tree not in bdds:
                raise ModelError(f"no diagram for fault tree {bp.fault_tree} of branch point {bp.id}")
            out[bp.id] = set(bdds[bp.fault_tree].order)
        elif bp.event is not None:
            out[bp.id] = {bp.event}
        else:
            out[bp.id] = set()
    return out


def check_shared_sources(et: EventTree, events: Mapping[str, set[str]], measure: EventMeasure) -> None:
    """Reject couplings between branches that the declared sources do not cut.

    Any event used by two branch points must be a declared source, and the
    non-source members of a dependency group may feed only one branch point.
    """
    sources = set(et.shared_sources)
    ids = list(events)
    problems = []
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            undeclared = sorted((events[a] & events[b]) - sources)
            if undeclared:
                problems.append(f"branch points {a} and {b} share {undeclared} which are not declared shared sources")
    for label, table in measure.tables.items():
        rest = set(table.members) - sources
        users = [bp for bp in ids if events[bp] & rest]
        if len(users) > 1:
            problems.append(
                f"dependency group {label} couples branch points {users} through non-source members "
                f"{sorted(rest)}; declare them as shared sources"
            )
    if problems:
        raise ModelError("; ".join(problems))


def quantify_event_tree(et: EventTree, bdds: Mapping[str, Bdd], groups=(), marginals=None) -> LossFrequencies:
    """Loss frequencies W(T0) * P(sequence), summed per consequence."""
    measure = groups if isinstance(groups, EventMeasure) else EventMeasure(groups, marginals)
    sources = _check_sources(et.shared_sources)
    events = branch_events(et, bdds)
    check_shared_sources(et, events, measure)
    states = source_states(sources)
    weights = source_weights(sources, measure)
    possible = weights > 0.0
    impossible = [state_label(s) for s, ok in zip(states, possible) if not ok]

    cond: dict[str, np.ndarray] = {}
    vectors: dict[str, ConditionalVector] = {}
    for bp in et.branch_points:
        if bp.fault_tree is not None:
            vec = vectors.get(bp.fault_tree)
            if vec is None:
                vec = conditional_vector(bdds[bp.fault_tree], sources, measure, top=bp.fault_tree)
                vectors[bp.fault_tree] = vec
            cond[bp.id] = np.where(vec.possible, vec.entries, 0.0)
        elif bp.event is not None:
            if bp.event in sources:
                cond[bp.id] = np.array([float(s[bp.event]) for s in states])
            else:
                col = np.zeros(len(states))
                for i, s in enumerate(states):
                    if possible[i]:
                        col[i] = measure.prob({**s, bp.event: True}) / weights[i]
                cond[bp.id] = col
        else:
            cond[bp.id] = np.full(len(states), float(bp.probability))

    w = np.where(possible, weights, 0.0)
    freqs: dict[str, float] = {c: 0.0 for c in et.consequences()}
    seq_rows = []
    parts: dict[str, list[float]] = {c: [] for c in freqs}
    for n, seq in enumerate(et.sequences, start=1):
        term = w.copy()
        for b, v in seq.outcomes:
            term = term * (cond[b] if v else 1.0 - cond[b])
        p = math.fsum(term)
        f = et.frequency * p
        parts[seq.consequence].append(f)
        seq_rows.append(
            {
                "sequence": n,
                "outcomes": {b: bool(v) for b, v in seq.outcomes},
                "consequence": seq.consequence,
                "probability": p,
                "frequency": f,
            }
        )
    for c, fs in parts.items():
        freqs[c] = math.fsum(fs)

    joints = {}
    ft_bps = [bp for bp in et.branch_points if bp.fault_tree is not None]
    if sources:
        table = JointTable(sources, np.where(possible, weights, 0.0) / max(w.sum(), 1e-300))
        for i, a in enumerate(ft_bps):
            for b in ft_bps[i + 1:]:
                if a.fault_tree == b.fault_tree:
                    continue
                if (events[a.id] & events[b.id]) & set(sources):
                    joints[(a.fault_tree, b.fault_tree)] = joint_top_events(
                        vectors[a.fault_tree], vectors[b.fault_tree], table
                    )
    return LossFrequencies(et.id, et.frequency, sources, freqs, seq_rows, vectors, joints, impossible)


__all__ = [
    "MAX_SOURCES",
    "ConditionalVector",
    "LossFrequencies",
    "check_shared_sources",
    "conditional_vector",
    "joint_top_events",
    "quantify_event_tree",
    "source_states",
    "source_weights",
]
