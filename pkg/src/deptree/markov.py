"""Continuous-time Markov models used as dependency-group sources."""

from __future__ import annotations

from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, SolverError
from .joint import JointTable, state_index

MAX_STATES = 10_000
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class MarkovModel:
    """States, rated transitions and a map from states onto group states.

    ``state_map`` sends each state name to the tuple of group members that
    have occurred (failed) in that state. ``initial`` defaults to the first
    state and only matters for deciding which states are reachable.
    """

    states: tuple[str, ...]
    transitions: tuple[tuple[str, str, float], ...]
    members: tuple[str, ...] = ()
    state_map: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    initial: str | None = None

    def __post_init__(self):
        if len(set(self.states)) != len(self.states):
            raise ModelError("duplicate Markov state names")
        known = set(self.states)
        for src, dst, rate in self.transitions:
            if src not in known or dst not in known:
                raise ModelError(f"transition {src}->{dst} references an unknown state")
            if src == dst:
                raise ModelError(f"self-loop transition on state {src}")
            if not rate >= 0.0:
                raise ModelError(f"negative rate on {src}->{dst}")
        if self.initial is not None and self.initial not in known:
            raise ModelError(f"unknown initial state {self.initial}")
        for state, occurred in self.state_map.items():
            if state not in known:
                raise ModelError(f"state_map references unknown state {state}")
            bad = set(occurred) - set(self.members)
            if bad:
                raise ModelError(f"state {state} maps to non-members {sorted(bad)}")

    def generator(self) -> np.ndarray:
        n = len(self.states)
        index = {s: i for i, s in enumerate(self.states)}
        q = np.zeros((n, n))
        for src, dst, rate in self.transitions:
            q[index[src], index[dst]] += rate
        np.fill_diagonal(q, -q.sum(axis=1))
        return q

    def to_dict(self) -> dict:
        out = {
            "states": list(self.states),
            "transitions": [{"from": a, "to": b, "rate": r} for a, b, r in self.transitions],
            "members": list(self.members),
            "state_map": {s: list(v) for s, v in self.state_map.items()},
        }
        if self.initial is not None:
            out["initial"] = self.initial
        return out


def _reach(adj: list[list[int]], start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def mm_steady_state(mm: MarkovModel) -> np.ndarray:
    """Stationary distribution over ``mm.states``.

    Unreachable states get probability zero. The chain restricted to the
    states reachable from the initial state must be irreducible.
    """
    n = len(mm.states)
    if n == 0:
        raise SolverError("Markov model has no states")
    if n > MAX_STATES:
        raise SolverError(f"{n} states exceeds the dense-solver limit of {MAX_STATES}")
    gen = mm.generator()
    rates = gen.copy()
    np.fill_diagonal(rates, 0.0)
    fwd = [list(np.nonzero(rates[i] > 0)[0]) for i in range(n)]
    bwd = [list(np.nonzero(rates[:, i] > 0)[0]) for i in range(n)]
    start = mm.states.index(mm.initial) if mm.initial is not None else 0
    reachable = _reach(fwd, start)
    if len(reachable) > 1:
        absorbing = [mm.states[i] for i in sorted(reachable) if not fwd[i]]
        if absorbing:
            raise SolverError(f"absorbing state(s) {absorbing}: no steady state with repair")
    returning = _reach(bwd, start)
    stuck = sorted(reachable - returning)
    if stuck:
        raise SolverError(
            "reducible chain: states " + str([mm.states[i] for i in stuck]) + f" cannot return to {mm.states[start]}"
        )
    idx = sorted(reachable)
    sub = gen[np.ix_(idx, idx)]
    m = len(idx)
    a = sub.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    pi_sub = np.linalg.solve(a, b)
    pi_sub = np.where(np.abs(pi_sub) < 1e-300, 0.0, pi_sub)
    scale = max(1.0, float(np.max(np.abs(sub))))
    residual = float(np.max(np.abs(pi_sub @ sub))) / scale if m > 1 else 0.0
    if residual > RESIDUAL_TOL or pi_sub.min() < -RESIDUAL_TOL:
        raise SolverError(f"steady-state residual {residual:.3g} above tolerance")
    pi = np.zeros(n)
    pi[idx] = np.clip(pi_sub, 0.0, None)
    return pi / pi.sum()


def mm_to_joint(mm: MarkovModel, pi: np.ndarray | None = None, group: str = "") -> JointTable:
    """Aggregate state probabilities and transition flows onto group states."""
    if pi is None:
        pi = mm_steady_state(mm)
    k = len(mm.members)
    if k == 0:
        raise ModelError("Markov model declares no group members")
    unmapped = [s for s in mm.states if s not in mm.state_map]
    if unmapped:
        raise ModelError(f"unmapped Markov state(s) {unmapped}")
    pos = {s: i for i, s in enumerate(mm.states)}
    to_group = {}
    for s in mm.states:
        occurred = set(mm.state_map[s])
        to_group[s] = state_index([m in occurred for m in mm.members])
    probs = np.zeros(2**k)
    for s in mm.states:
        probs[to_group[s]] += pi[pos[s]]
    flows = np.zeros((2**k, 2**k))
    for src, dst, rate in mm.transitions:
        a, b = to_group[src], to_group[dst]
        if a != b:
            flows[a, b] += pi[pos[src]] * rate
    return JointTable(mm.members, probs, flows=flows, group=group)
