"""Top-event metrics from BDD paths with dependency groups.

A path probability factors into one term for the independent events (DG0)
and one term per dependency group; a group term is the group's joint
probability of the literals the path fixes, marginalized over the members
the path does not mention.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping

from .bdd import FALSE, PATH_LIMIT, TRUE, Bdd, FailurePath, enumerate_paths
from .errors import MissingDataError, ModelError, NullEventError, UnsupportedError
from .joint import JointTable
from .model import INDEPENDENT

Literals = Mapping[str, bool]


class EventMeasure:
    """Probability measure over basic-event states.

    ``groups`` are joint tables (a mapping of group id to table or a plain
    iterable); ``marginals`` give q for independent events.
    """

    def __init__(self, groups: Mapping[str, JointTable] | Iterable[JointTable] = (), marginals: Mapping[str, float] | None = None):
        items = groups.items() if isinstance(groups, Mapping) else ((t.group, t) for t in groups)
        self.tables: dict[str, JointTable] = {}
        self._owner: dict[str, str] = {}
        for i, (label, table) in enumerate(items, start=1):
            label = label or table.group or f"DG{i}"
            if label in self.tables:
                raise ModelError(f"duplicate group label {label}")
            self.tables[label] = table
            for m in table.members:
                if m in self._owner:
                    raise ModelError(f"event {m} in multiple dependency groups ({self._owner[m]}, {label})")
                self._owner[m] = label
        self.marginals: dict[str, float] = {}
        for e, q in (marginals or {}).items():
            if e in self._owner:
                continue
            q = float(q)
            if not 0.0 <= q <= 1.0:
                raise ModelError(f"probability of {e} out of [0, 1]: {q}")
            self.marginals[e] = q
        self._cache: dict[tuple, float] = {}

    def group_of(self, event: str) -> str:
        return self._owner.get(event, INDEPENDENT)

    def split(self, literals: Literals | Iterable[tuple[str, bool]]) -> dict[str, dict[str, bool]]:
        items = literals.items() if isinstance(literals, Mapping) else literals
        parts: dict[str, dict[str, bool]] = {}
        for e, v in items:
            parts.setdefault(self.group_of(e), {})[e] = bool(v)
        return parts

    def _group_prob(self, label: str, sub: dict[str, bool]) -> float:
        key = (label, frozenset(sub.items()))
        p = self._cache.get(key)
        if p is None:
            p = self.tables[label].probability(sub)
            self._cache[key] = p
        return p

    def factors(self, literals) -> dict[str, float]:
        out: dict[str, float] = {}
        for label, sub in self.split(literals).items():
            if label == INDEPENDENT:
                value = 1.0
                for e, v in sub.items():
                    try:
                        q = self.marginals[e]
                    except KeyError:
                        raise MissingDataError(f"no probability for event {e}") from None
                    value *= q if v else 1.0 - q
                out[label] = value
            else:
                out[label] = self._group_prob(label, sub)
        return out

    def prob(self, literals) -> float:
        value = 1.0
        for f in self.factors(literals).values():
            value *= f
        return value


def as_measure(groups=(), marginals=None) -> EventMeasure:
    if isinstance(groups, EventMeasure):
        return groups
    return EventMeasure(groups, marginals)


def path_probability(path: FailurePath, groups=(), marginals=None) -> float:
    return as_measure(groups, marginals).prob(path.literals)


def _function_probability(bdd: Bdd, u: int, measure: EventMeasure, limit: int) -> float:
    if u == FALSE:
        return 0.0
    return math.fsum(measure.prob(p.literals) for p in enumerate_paths(bdd, TRUE, limit, u))


def top_probability(bdd: Bdd, groups=(), marginals=None, limit: int = PATH_LIMIT) -> float:
    """Sum of the probabilities of all paths to terminal 1."""
    return _function_probability(bdd, bdd.root, as_measure(groups, marginals), limit)


def joint_with(bdd: Bdd, literals: Literals, groups=(), marginals=None, limit: int = PATH_LIMIT) -> float:
    """Q(TOP and literals).

    Paths holding the complement of a literal are dropped. Each remaining
    path contributes the probability of its own literals together with the
    given ones, so a path silent on a literal is weighted by that literal's
    probability conditional on the path (its group context when the literal
    is in a dependency group, its marginal otherwise).
    """
    measure = as_measure(groups, marginals)
    literals = {e: bool(v) for e, v in literals.items()}
    total = []
    for path in enumerate_paths(bdd, TRUE, limit):
        if not path.compatible(literals):
            continue
        combined = dict(path.literals)
        combined.update(literals)
        total.append(measure.prob(combined))
    return math.fsum(total)


def literal_probability(literals: Literals, groups=(), marginals=None) -> float:
    return as_measure(groups, marginals).prob(literals)


def conditional_given(bdd: Bdd, literals: Literals, groups=(), marginals=None, limit: int = PATH_LIMIT) -> float:
    """Q(TOP | literals)."""
    measure = as_measure(groups, marginals)
    denom = measure.prob(literals)
    if denom <= 0.0:
        raise NullEventError(f"conditioning on zero-probability literals {dict(literals)}")
    return min(1.0, joint_with(bdd, literals, measure, limit=limit) / denom)


def compatible_paths(bdd: Bdd, literals: Literals, limit: int = PATH_LIMIT) -> list[FailurePath]:
    return [p for p in enumerate_paths(bdd, TRUE, limit) if p.compatible(literals)]


def _independent_probability(bdd: Bdd, q_by_level: list[float], u: int) -> float:
    memo = {FALSE: 0.0, TRUE: 1.0}
    for w in reversed(bdd._topological(u)):
        q = q_by_level[bdd._lvl[w]]
        memo[w] = q * memo[bdd.high(w)] + (1.0 - q) * memo[bdd.low(w)]
    return memo[u]


def birnbaum(bdd: Bdd, marginals: Mapping[str, float]) -> dict[str, float]:
    """Q(TOP | X=1) - Q(TOP | X=0) for every event, all events independent."""
    try:
        q = [float(marginals[e]) for e in bdd.order]
    except KeyError as exc:
        raise MissingDataError(f"no probability for event {exc.args[0]}") from None
    out = {}
    for i, e in enumerate(bdd.order):
        saved = q[i]
        q[i] = 1.0
        up = _independent_probability(bdd, q, bdd.root)
        q[i] = 0.0
        down = _independent_probability(bdd, q, bdd.root)
        q[i] = saved
        out[e] = up - down
    return out


def top_frequency_independent(bdd: Bdd, marginals: Mapping[str, float], intensities: Mapping[str, float]) -> float:
    """W(TOP) = sum of Birnbaum importance times event intensity."""
    imp = birnbaum(bdd, marginals)
    total = []
    for e, b in imp.items():
        try:
            w = float(intensities[e])
        except KeyError:
            raise MissingDataError(f"no failure intensity for event {e}") from None
        total.append(b * w)
    return max(0.0, math.fsum(total))


def top_frequency(bdd: Bdd, groups=(), marginals=None, intensities=None, limit: int = PATH_LIMIT) -> float:
    """W(TOP) with dependency groups.

    Independent events contribute ``w_j`` times the probability that they are
    critical. A dependency group contributes, for every pair of group states
    ``a -> b``, its transition flow times the probability that the rest of
    the system makes the top event absent in ``a`` and present in ``b``.
    Groups therefore need transition flows (from a Markov model, a net
    simulation, or data).
    """
    measure = as_measure(groups, marginals)
    intensities = intensities or {}
    touching = sorted({measure.group_of(e) for e in bdd.order} - {INDEPENDENT})
    if not touching:
        return top_frequency_independent(bdd, measure.marginals, intensities)
    for label in touching:
        if measure.tables[label].flows is None:
            raise UnsupportedError(f"unsupported: group frequency source required for {label} (transition flows)")
    total = []
    f = bdd.root
    for e in bdd.order:
        if measure.group_of(e) != INDEPENDENT:
            continue
        try:
            w = float(intensities[e])
        except KeyError:
            raise MissingDataError(f"no failure intensity for event {e}") from None
        if w == 0.0:
            continue
        h = bdd.apply("diff", bdd.restrict(f, {e: True}), bdd.restrict(f, {e: False}))
        total.append(w * _function_probability(bdd, h, measure, limit))
    for label in touching:
        table = measure.tables[label]
        k = table.k
        for a in range(2**k):
            for b in range(2**k):
                flow = table.flows[a, b]
                if flow == 0.0:
                    continue
                sa = {m: bool((a >> (k - 1 - j)) & 1) for j, m in enumerate(table.members)}
                sb = {m: bool((b >> (k - 1 - j)) & 1) for j, m in enumerate(table.members)}
                h = bdd.apply("diff", bdd.restrict(f, sb), bdd.restrict(f, sa))
                if h != FALSE:
                    total.append(flow * _function_probability(bdd, h, measure, limit))
    return max(0.0, math.fsum(total))


def path_table(bdd: Bdd, groups=(), marginals=None, limit: int = PATH_LIMIT, paths=None) -> list[dict]:
    """Paths to terminal 1 with their per-group factorization."""
    measure = as_measure(groups, marginals)
    rows = []
    for i, path in enumerate(paths if paths is not None else enumerate_paths(bdd, TRUE, limit), start=1):
        parts = measure.split(path.literals)
        factors = measure.factors(path.literals)
        rows.append(
            {
                "path": i,
                "literals": path.text(),
                "factors": {
                    label: {
                        "literals": " ".join(e if v else "~" + e for e, v in parts[label].items()),
                        "value": factors[label],
                    }
                    for label in sorted(parts, key=lambda s: (s != INDEPENDENT, s))
                },
                "probability": measure.prob(path.literals),
            }
        )
    return rows
