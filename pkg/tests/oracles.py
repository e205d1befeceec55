"""Brute-force reference computations used by the tests.

Nothing here goes through BDDs or path factorization: fault trees are
evaluated on every complete state of the basic events at once and weighted
by the exact state probabilities.
"""

from __future__ import annotations


import numpy as np

from deptree.joint import JointTable
from deptree.model import BasicEvent, FaultTree, Gate
from deptree.petri import Exponential, StochasticPetriNet, Transition


def all_states(events):
    """Boolean matrix with one row per complete state and one column per event."""
    n = len(events)
    idx = np.arange(2**n)
    cols = [(idx >> (n - 1 - j)) & 1 for j in range(n)]
    return np.stack(cols, axis=1).astype(bool) if n else np.zeros((1, 0), dtype=bool)


def state_weights(events, states, marginals, tables=()):
    """Exact probability of each complete state."""
    col = {e: j for j, e in enumerate(events)}
    w = np.ones(states.shape[0])
    grouped = set()
    for table in tables:
        k = len(table.members)
        idx = np.zeros(states.shape[0], dtype=int)
        for m in table.members:
            idx = idx * 2 + states[:, col[m]].astype(int)
            grouped.add(m)
        w = w * np.asarray(table.probs)[idx]
        assert k == len(table.members)
    for e in events:
        if e in grouped:
            continue
        q = marginals[e]
        w = w * np.where(states[:, col[e]], q, 1.0 - q)
    return w


def evaluate_tree(ft: FaultTree, events, states, node=None):
    """Truth value of ``node`` (default: the root) for every state row."""
    col = {e: j for j, e in enumerate(events)}
    memo = {}

    def value(name):
        if name in memo:
            return memo[name]
        if name not in ft.gates:
            v = states[:, col[name]]
        else:
            gate = ft.gates[name]
            parts = [value(c) for c in gate.inputs]
            v = np.logical_and.reduce(parts) if gate.kind == "AND" else np.logical_or.reduce(parts)
        memo[name] = v
        return v

    return value(ft.root if node is None else node)


class Enumeration:
    """Exhaustive state space of a fault tree with its exact weights."""

    def __init__(self, ft: FaultTree, marginals, tables=(), extra_events=(), events=None):
        events = list(ft.basic_event_order()) if events is None else list(events)
        for e in extra_events:
            if e not in events:
                events.append(e)
        for t in tables:
            for m in t.members:
                if m not in events:
                    events.append(m)
        self.events = events
        self.states = all_states(events)
        self.weights = state_weights(events, self.states, marginals, tables)
        self.top = evaluate_tree(ft, events, self.states)
        self._col = {e: j for j, e in enumerate(events)}

    def mask(self, literals):
        m = np.ones(self.states.shape[0], dtype=bool)
        for e, v in literals.items():
            m &= self.states[:, self._col[e]] == bool(v)
        return m

    def probability(self, literals=None):
        m = self.top if literals is None else self.top & self.mask(literals)
        return float(np.sum(self.weights[m]))

    def literal_probability(self, literals):
        return float(np.sum(self.weights[self.mask(literals)]))

    def conditional(self, literals):
        return self.probability(literals) / self.literal_probability(literals)


# --------------------------------------------------------------------------
# random models


def random_tree(rng: np.random.Generator, n_events: int, n_gates: int | None = None, prefix: str = "") -> FaultTree:
    """Random AND/OR DAG over ``n_events`` basic events.

    Gates are created bottom-up; each picks 2-3 inputs among the events and
    earlier gates, so sub-gates may be shared. Every event and gate ends up
    reachable from the root.
    """
    events = [f"{prefix}E{i}" for i in range(n_events)]
    n_gates = n_gates or int(rng.integers(1, max(2, n_events // 2) + 1))
    gates: dict[str, Gate] = {}
    unused = list(events)
    rng.shuffle(unused)
    pool = list(events)
    orphan_gates = []
    for g in range(n_gates):
        name = f"{prefix}G{g}"
        size = min(int(rng.integers(2, 4)), len(pool))
        inputs = []
        while unused and len(inputs) < size:
            inputs.append(unused.pop())
        while len(inputs) < size:
            cand = pool[int(rng.integers(len(pool)))]
            if cand not in inputs:
                inputs.append(cand)
        kind = "AND" if rng.random() < 0.45 else "OR"
        gates[name] = Gate(name, kind, tuple(inputs))
        for c in inputs:
            if c in orphan_gates:
                orphan_gates.remove(c)
        orphan_gates.append(name)
        pool.append(name)
    # attach remaining events and gates under a root
    leftovers = unused + orphan_gates
    if len(leftovers) == 1 and leftovers[0] in gates:
        root = leftovers[0]
    else:
        root = f"{prefix}TOP"
        gates[root] = Gate(root, "AND" if rng.random() < 0.3 else "OR", tuple(leftovers))
    ordered = dict(reversed(list(gates.items())))
    tmp = FaultTree("T", root, ordered, {})
    used = tmp.basic_event_order()
    return FaultTree(f"{prefix}T", root, ordered, {e: BasicEvent(e, probability=0.5) for e in used})


def random_table(rng: np.random.Generator, members, zero_fraction: float = 0.2) -> JointTable:
    k = len(members)
    p = rng.dirichlet(np.full(2**k, 0.7))
    if rng.random() < 0.5:
        p[rng.random(2**k) < zero_fraction] = 0.0
        if p.sum() == 0.0:
            p[0] = 1.0
        p = p / p.sum()
    return JointTable(tuple(members), p)


def random_case(rng: np.random.Generator, max_events: int = 12):
    """A random tree with 0-2 dependency groups of up to 4 events."""
    n = int(rng.integers(2, max_events + 1))
    ft = random_tree(rng, n)
    events = ft.basic_event_order()
    free = list(events)
    rng.shuffle(free)
    tables = []
    for g in range(int(rng.integers(0, 3))):
        size = int(rng.integers(1, 5))
        if len(free) < size:
            break
        members = [free.pop() for _ in range(size)]
        tables.append(random_table(rng, members))
    grouped = {m for t in tables for m in t.members}
    marginals = {}
    for e in events:
        if e in grouped:
            continue
        u = rng.random()
        marginals[e] = 0.0 if u < 0.05 else 1.0 if u < 0.08 else float(rng.random())
    return ft, tables, marginals


def random_literals(rng: np.random.Generator, events, max_size: int = 3):
    size = int(rng.integers(1, min(max_size, len(events)) + 1))
    chosen = rng.choice(len(events), size=size, replace=False)
    return {events[int(i)]: bool(rng.random() < 0.5) for i in chosen}


# --------------------------------------------------------------------------
# Markov-chain frequency oracle


def ctmc_frequency(ft: FaultTree, component_rates, group=None):
    """Steady-state top-event frequency of a product Markov chain.

    ``component_rates`` maps independent events to ``(lambda, nu)``;
    ``group`` is an optional ``(members, generator over 2**k group states)``.
    Returns ``(Q, W)`` where W sums pi(s) * rate over transitions that take
    the top event from absent to present.
    """
    events = list(ft.basic_event_order())
    col = {e: j for j, e in enumerate(events)}
    members, gen = group if group else ((), np.zeros((1, 1)))
    k = len(members)
    # stationary distribution of the group chain
    if k:
        a = gen.T.copy()
        a[-1, :] = 1.0
        b = np.zeros(2**k)
        b[-1] = 1.0
        pi_g = np.linalg.solve(a, b)
    else:
        pi_g = np.ones(1)
    states = all_states(events)
    top = evaluate_tree(ft, events, states)
    index = {tuple(row): i for i, row in enumerate(states.tolist())}

    def prob(row):
        p = 1.0
        gi = 0
        for m in members:
            gi = gi * 2 + int(row[col[m]])
        p *= pi_g[gi]
        for e, (lam, nu) in component_rates.items():
            q = lam / (lam + nu)
            p *= q if row[col[e]] else 1.0 - q
        return p

    q_top = 0.0
    w_top = 0.0
    for i, row in enumerate(states.tolist()):
        p = prob(row)
        if top[i]:
            q_top += p
            continue
        for e, (lam, nu) in component_rates.items():
            if not row[col[e]]:
                nxt = list(row)
                nxt[col[e]] = True
                if top[index[tuple(nxt)]]:
                    w_top += p * lam
        if k:
            gi = 0
            for m in members:
                gi = gi * 2 + int(row[col[m]])
            for gj in range(2**k):
                if gj == gi or gen[gi, gj] == 0.0:
                    continue
                nxt = list(row)
                for pos, m in enumerate(members):
                    nxt[col[m]] = bool((gj >> (k - 1 - pos)) & 1)
                if top[index[tuple(nxt)]]:
                    w_top += p * gen[gi, gj]
    return q_top, w_top


def group_generator(mm) -> tuple[tuple[str, ...], np.ndarray]:
    """Generator of a Markov model lumped onto group states (state = member bits)."""
    k = len(mm.members)
    gen = np.zeros((2**k, 2**k))
    for src, dst, rate in mm.transitions:
        a = sum(1 << (k - 1 - j) for j, m in enumerate(mm.members) if m in mm.state_map[src])
        b = sum(1 << (k - 1 - j) for j, m in enumerate(mm.members) if m in mm.state_map[dst])
        gen[a, b] += rate
    np.fill_diagonal(gen, 0.0)
    np.fill_diagonal(gen, -gen.sum(axis=1))
    return tuple(mm.members), gen


# --------------------------------------------------------------------------
# whole-system net for the cold-standby benchmark


def standby_system_net(rates) -> StochasticPetriNet:
    """Every component of the standby tree simulated directly.

    Train A (X2, X3, X4) runs from time 0; train B (X5, X6, X7) is dormant
    and its components can fail only once train A is down. ``trainA_down``
    collects one token per failed train-A component.
    """
    places = {}
    transitions = []
    for e in rates:
        places[f"{e}_up"] = 1
        places[f"{e}_down"] = 0
    places["trainA_down"] = 0
    for e, lam in rates.items():
        outputs = {f"{e}_down": 1}
        tests = {}
        if e in ("X2", "X3", "X4"):
            outputs["trainA_down"] = 1
        if e in ("X5", "X6", "X7"):
            tests["trainA_down"] = 1
        transitions.append(
            Transition(f"F_{e}", Exponential(lam), inputs={f"{e}_up": 1}, outputs=outputs, tests=tests)
        )
    members = tuple(rates)
    return StochasticPetriNet(places, tuple(transitions), members, {e: f"{e}_down" for e in members})


def top_indicator_from_table(ft: FaultTree, members, point_probs):
    """Probability of the top event from a joint distribution over ``members``."""
    states = all_states(list(members))
    top = evaluate_tree(ft, list(members), states)
    return float(np.sum(np.asarray(point_probs)[top]))


def two_state_q(lam, nu, t=None):
    if t is None:
        return lam / (lam + nu)
    return lam / (lam + nu) * (1.0 - np.exp(-(lam + nu) * t))


def product(iterable):
    out = 1.0
    for v in iterable:
        out *= v
    return out


__all__ = [name for name in dir() if not name.startswith("_") and name not in ("itertools", "np")]
