"""Joint probability tables over the states of a dependency group.

A table over members ``(m0, m1, ..., m{k-1})`` stores ``2**k`` entries in
binary-counting order with ``m0`` as the most significant bit; bit value 1
means the event occurred. For two members the order is therefore
``(~A,~B), (~A,B), (A,~B), (A,B)``.

Besides probabilities a table may carry

* ``freqs`` -- state-entry frequencies (per hour), one per state;
* ``flows`` -- a ``2**k x 2**k`` matrix of transition frequencies between
  states (row = from, column = to). ``freqs`` is its column sum when both
  are present. Flows are what top-event frequency calculations need.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, NullEventError

MAX_MEMBERS = 20
NORMALIZATION_TOL = 1e-9


def state_index(bits: Sequence[bool]) -> int:
    """Index of a complete state vector (member 0 most significant)."""
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(bool(b))
    return idx


def state_bits(index: int, k: int) -> tuple[bool, ...]:
    return tuple(bool((index >> (k - 1 - j)) & 1) for j in range(k))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class JointTable:
    members: tuple[str, ...]
    probs: np.ndarray
    freqs: np.ndarray | None = None
    flows: np.ndarray | None = None
    group: str = ""
    max_members: int = field(default=MAX_MEMBERS, repr=False)

    def __post_init__(self):
        members = tuple(self.members)
        k = len(members)
        if len(set(members)) != k:
            raise ModelError(f"duplicate members in joint table: {members}")
        if k > self.max_members:
            raise ModelError(f"dependency group of {k} events exceeds the cap of {self.max_members}")
        probs = np.asarray(self.probs, dtype=float).ravel()
        if probs.size != 2**k:
            raise ModelError(f"joint table over {k} members needs {2**k} entries, got {probs.size}")
        if not np.all(np.isfinite(probs)) or probs.min() < 0.0 or probs.max() > 1.0:
            raise ModelError("joint probabilities must lie in [0, 1]")
        total = math.fsum(probs)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ModelError(f"joint probabilities sum to {total!r}, not 1")
        if total != 1.0:
            probs = probs / total
        flows = self.flows
        freqs = self.freqs
        if flows is not None:
            flows = np.array(flows, dtype=float)
            if flows.shape != (2**k, 2**k):
                raise ModelError(f"flow matrix must be {2**k}x{2**k}")
            if not np.all(np.isfinite(flows)) or flows.min() < 0.0:
                raise ModelError("transition flows must be finite and non-negative")
            np.fill_diagonal(flows, 0.0)
            if freqs is None:
                freqs = flows.sum(axis=0)
        if freqs is not None:
            freqs = np.asarray(freqs, dtype=float).ravel()
            if freqs.size != 2**k:
                raise ModelError(f"frequency vector must have {2**k} entries")
            if not np.all(np.isfinite(freqs)) or freqs.min() < 0.0:
                raise ModelError("state-entry frequencies must be finite and non-negative")
            if flows is None and k == 1:
                # one member: every entry into a state comes from the other one
                flows = np.array([[0.0, freqs[1]], [freqs[0], 0.0]])
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "probs", _frozen(probs))
        object.__setattr__(self, "freqs", None if freqs is None else _frozen(freqs))
        object.__setattr__(self, "flows", None if flows is None else _frozen(flows))

    @property
    def k(self) -> int:
        return len(self.members)

    def position(self, member: str) -> int:
        try:
            return self.members.index(member)
        except ValueError:
            raise ModelError(f"{member!r} is not a member of table {self.members}") from None

    def tensor(self, values: np.ndarray | None = None) -> np.ndarray:
        """View ``values`` (default: probs) with one axis per member."""
        values = self.probs if values is None else values
        return values.reshape((2,) * self.k)

    def probability(self, evidence: Mapping[str, bool]) -> float:
        """Marginal probability of a partial state assignment."""
        t = self.tensor()
        index = [slice(None)] * self.k
        for name, value in evidence.items():
            index[self.position(name)] = int(bool(value))
        return float(np.sum(t[tuple(index)]))

    def __getitem__(self, state: Mapping[str, bool]) -> float:
        if len(state) != self.k:
            raise KeyError("complete state required; use probability() for partial evidence")
        return self.probability(state)

    def to_dict(self) -> dict:
        out: dict = {"members": list(self.members), "probs": self.probs.tolist()}
        if self.freqs is not None:
            out["freqs"] = self.freqs.tolist()
        if self.flows is not None:
            out["flows"] = self.flows.tolist()
        return out

    @classmethod
    def from_dict(cls, data: Mapping, group: str = "") -> JointTable:
        return cls(
            members=tuple(data["members"]),
            probs=np.asarray(data["probs"], dtype=float),
            freqs=None if data.get("freqs") is None else np.asarray(data["freqs"], dtype=float),
            flows=None if data.get("flows") is None else np.asarray(data["flows"], dtype=float),
            group=group,
        )

    def allclose(self, other: JointTable, atol: float = 1e-12) -> bool:
        return self.members == other.members and bool(np.allclose(self.probs, other.probs, rtol=0, atol=atol))


def _sum_axes(values: np.ndarray, k: int, keep_axes: list[int]) -> np.ndarray:
    t = values.reshape((2,) * k)
    drop = tuple(ax for ax in range(k) if ax not in keep_axes)
    reduced = t.sum(axis=drop) if drop else t
    # remaining axes are in ascending order; permute to the requested order
    remaining = sorted(keep_axes)
    perm = [remaining.index(ax) for ax in keep_axes]
    return np.transpose(reduced, perm).ravel()


def marginalize(table: JointTable, keep: Iterable[str]) -> JointTable:
    """Sum out every member not in ``keep``; result members follow ``keep``."""
    keep = list(keep)
    if not keep:
        raise ModelError("marginalize: empty member subset")
    if len(set(keep)) != len(keep):
        raise ModelError("marginalize: repeated members")
    axes = [table.position(m) for m in keep]
    probs = _sum_axes(table.probs, table.k, axes)
    flows = None
    freqs = None
    if table.flows is not None:
        k = table.k
        f = table.flows.reshape((2,) * (2 * k))
        from_axes = axes
        to_axes = [k + a for a in axes]
        drop = tuple(ax for ax in range(2 * k) if ax not in from_axes + to_axes)
        reduced = f.sum(axis=drop) if drop else f
        remaining = sorted(from_axes + to_axes)
        perm = [remaining.index(ax) for ax in from_axes + to_axes]
        m = len(keep)
        flows = np.transpose(reduced, perm).reshape(2**m, 2**m).copy()
        np.fill_diagonal(flows, 0.0)
    elif table.freqs is not None:
        freqs = _sum_axes(table.freqs, table.k, axes)
    return JointTable(tuple(keep), probs, freqs=freqs, flows=flows, group=table.group)


def condition(table: JointTable, evidence: Mapping[str, bool]) -> JointTable:
    """Condition on a partial state vector.

    The result is over the members not fixed by ``evidence``; when the
    evidence covers every member the result is an empty table holding the
    single probability 1. Frequencies are not carried over.
    """
    if not evidence:
        return JointTable(table.members, table.probs, group=table.group)
    t = table.tensor()
    index = [slice(None)] * table.k
    for name, value in evidence.items():
        index[table.position(name)] = int(bool(value))
    sub = np.asarray(t[tuple(index)], dtype=float)
    mass = float(sub.sum())
    if mass <= 0.0:
        raise NullEventError(f"conditioning on null event {dict(evidence)}")
    rest = tuple(m for m in table.members if m not in evidence)
    return JointTable(rest, (sub / mass).ravel(), group=table.group)


def independence_gap(table: JointTable, a: str, b: str) -> float:
    """Largest deviation ``|q(a,b) - q(a) q(b)|`` over the four joint states."""
    if a == b:
        raise ModelError("independence_gap needs two distinct members")
    pair = marginalize(table, [a, b]).probs.reshape(2, 2)
    outer = np.outer(pair.sum(axis=1), pair.sum(axis=0))
    return float(np.max(np.abs(pair - outer)))


def check_d_separation(table: JointTable, source: str, a: str, c: str, tol: float = 1e-12) -> dict[bool, bool | None]:
    """Test whether instantiating ``source`` makes ``a`` and ``c`` independent.

    Returns, for each source state, True/False, or None when that state has
    zero probability and the conditional is undefined.
    """
    if len({source, a, c}) != 3:
        raise ModelError("d-separation check needs three distinct members")
    cube = marginalize(table, [source, a, c]).probs.reshape(2, 2, 2)
    out: dict[bool, bool | None] = {}
    for s in (True, False):
        block = cube[int(s)]
        mass = block.sum()
        if mass <= 0.0:
            out[s] = None
            continue
        cond = block / mass
        gap = np.max(np.abs(cond - np.outer(cond.sum(axis=1), cond.sum(axis=0))))
        out[s] = bool(gap <= tol)
    return out


def from_marginals(probs: Mapping[str, float] | Sequence[tuple[str, float]], group: str = "") -> JointTable:
    """Product-form table for independent events."""
    items = list(probs.items()) if isinstance(probs, Mapping) else list(probs)
    if not items:
        raise ModelError("from_marginals needs at least one event")
    table = np.ones(1)
    for name, q in items:
        q = float(q)
        if not 0.0 <= q <= 1.0:
            raise ModelError(f"probability of {name!r} out of [0, 1]: {q}")
        table = np.outer(table, [1.0 - q, q]).ravel()
    return JointTable(tuple(n for n, _ in items), table, group=group)
