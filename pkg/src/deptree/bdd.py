"""Reduced ordered binary decision diagrams built from fault trees.

Nodes live in a per-diagram store and are hash-consed on
``(level, low, high)``; node 0 is the terminal 0 and node 1 the terminal 1.
``low`` is the 0-branch (event did not occur), ``high`` the 1-branch.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass

from .errors import OrderingError, PathLimitError
from .model import FaultTree

FALSE = 0
TRUE = 1
PATH_LIMIT = 10**6


@dataclass(frozen=True)
class FailurePath:
    """Literals met along a root-to-terminal path, in diagram order."""

    literals: tuple[tuple[str, bool], ...]
    terminal: int = 1

    def as_dict(self) -> dict[str, bool]:
        return dict(self.literals)

    def events(self) -> tuple[str, ...]:
        return tuple(e for e, _ in self.literals)

    def compatible(self, literals: Mapping[str, bool]) -> bool:
        """True unless the path contains the complement of a given literal."""
        for e, v in self.literals:
            if e in literals and literals[e] != v:
                return False
        return True

    def text(self) -> str:
        return " ".join(e if v else "~" + e for e, v in self.literals)


class Bdd:
    def __init__(self, order: Sequence[str]):
        order = tuple(order)
        if len(set(order)) != len(order):
            raise OrderingError("variable ordering repeats an event")
        self.order = order
        self.level = {v: i for i, v in enumerate(order)}
        n = len(order)
        self._lvl = [n, n]
        self._lo = [FALSE, TRUE]
        self._hi = [FALSE, TRUE]
        self._unique: dict[tuple[int, int, int], int] = {}
        self._memo: dict[tuple[str, int, int], int] = {}
        self.root = FALSE

    # -- construction -----------------------------------------------------

    def node(self, level: int, low: int, high: int) -> int:
        if low == high:
            return low
        key = (level, low, high)
        u = self._unique.get(key)
        if u is None:
            u = len(self._lvl)
            self._lvl.append(level)
            self._lo.append(low)
            self._hi.append(high)
            self._unique[key] = u
        return u

    def var(self, name: str) -> int:
        return self.node(self.level[name], FALSE, TRUE)

    def apply(self, op: str, u: int, v: int) -> int:
        if op == "and":
            if u == FALSE or v == FALSE:
                return FALSE
            if u == TRUE:
                return v
            if v == TRUE or u == v:
                return u
        elif op == "or":
            if u == TRUE or v == TRUE:
                return TRUE
            if u == FALSE:
                return v
            if v == FALSE or u == v:
                return u
        elif op == "diff":  # u and not v
            if u == FALSE or v == TRUE:
                return FALSE
            if v == FALSE:
                return u
            if u == v:
                return FALSE
            if u == TRUE:
                return self.negate(v)
        else:
            raise ValueError(op)
        if op != "diff" and u > v:
            u, v = v, u
        key = (op, u, v)
        r = self._memo.get(key)
        if r is not None:
            return r
        lu, lv = self._lvl[u], self._lvl[v]
        top = min(lu, lv)
        u0, u1 = (self._lo[u], self._hi[u]) if lu == top else (u, u)
        v0, v1 = (self._lo[v], self._hi[v]) if lv == top else (v, v)
        r = self.node(top, self.apply(op, u0, v0), self.apply(op, u1, v1))
        self._memo[key] = r
        return r

    def negate(self, u: int) -> int:
        if u <= TRUE:
            return 1 - u
        key = ("not", u, u)
        r = self._memo.get(key)
        if r is None:
            r = self.node(self._lvl[u], self.negate(self._lo[u]), self.negate(self._hi[u]))
            self._memo[key] = r
        return r

    def restrict(self, u: int, assignment: Mapping[str, bool]) -> int:
        """Cofactor of ``u`` with the given events fixed."""
        fixed = {self.level[e]: bool(v) for e, v in assignment.items() if e in self.level}
        if not fixed:
            return u
        cache: dict[int, int] = {}

        def go(w: int) -> int:
            if w <= TRUE:
                return w
            if w in cache:
                return cache[w]
            lvl = self._lvl[w]
            if lvl in fixed:
                r = go(self._hi[w] if fixed[lvl] else self._lo[w])
            else:
                r = self.node(lvl, go(self._lo[w]), go(self._hi[w]))
            cache[w] = r
            return r

        return go(u)

    # -- inspection -------------------------------------------------------

    def variable(self, u: int) -> str:
        return self.order[self._lvl[u]]

    def low(self, u: int) -> int:
        return self._lo[u]

    def high(self, u: int) -> int:
        return self._hi[u]

    def nodes(self, u: int | None = None) -> list[int]:
        """Internal nodes reachable from ``u`` (default root), parents first."""
        start = self.root if u is None else u
        out: list[int] = []
        seen: set[int] = set()
        stack = [start]
        while stack:
            w = stack.pop()
            if w <= TRUE or w in seen:
                continue
            seen.add(w)
            out.append(w)
            stack.append(self._lo[w])
            stack.append(self._hi[w])
        return out

    def evaluate(self, assignment: Mapping[str, bool], u: int | None = None) -> bool:
        w = self.root if u is None else u
        while w > TRUE:
            w = self._hi[w] if assignment[self.order[self._lvl[w]]] else self._lo[w]
        return w == TRUE

    def count_paths(self, terminal: int = TRUE, u: int | None = None) -> int:
        memo: dict[int, int] = {FALSE: int(terminal == FALSE), TRUE: int(terminal == TRUE)}
        for w in reversed(self._topological(self.root if u is None else u)):
            memo[w] = memo[self._lo[w]] + memo[self._hi[w]]
        return memo[self.root if u is None else u]

    def _topological(self, u: int) -> list[int]:
        order: list[int] = []
        seen: set[int] = set()

        def visit(w: int) -> None:
            if w <= TRUE or w in seen:
                return
            seen.add(w)
            visit(self._hi[w])
            visit(self._lo[w])
            order.append(w)

        visit(u)
        order.reverse()
        return order

    def iter_paths(self, terminal: int = TRUE, u: int | None = None) -> Iterator[FailurePath]:
        """Depth-first, 1-branch before 0-branch."""
        start = self.root if u is None else u
        stack: list[tuple[int, tuple[tuple[str, bool], ...]]] = [(start, ())]
        while stack:
            w, lits = stack.pop()
            if w <= TRUE:
                if w == terminal:
                    yield FailurePath(lits, terminal)
                continue
            name = self.order[self._lvl[w]]
            stack.append((self._lo[w], lits + ((name, False),)))
            stack.append((self._hi[w], lits + ((name, True),)))

    def __len__(self) -> int:
        return len(self.nodes())

    def to_dot(self, name: str = "bdd") -> str:
        """Graphviz source: solid edges are 1-branches, dashed 0-branches."""
        lines = [f'digraph "{name}" {{', "  node [shape=circle];"]
        lines.append('  t0 [label="0", shape=box];')
        lines.append('  t1 [label="1", shape=box];')

        def ref(w: int) -> str:
            return f"t{w}" if w <= TRUE else f"n{w}"

        for w in sorted(self.nodes()):
            lines.append(f'  n{w} [label="{self.order[self._lvl[w]]}"];')
        for w in sorted(self.nodes()):
            lines.append(f"  n{w} -> {ref(self._hi[w])};")
            lines.append(f"  n{w} -> {ref(self._lo[w])} [style=dashed];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_bdd(ft: FaultTree, ordering: Sequence[str] | None = None) -> Bdd:
    """BDD of ``ft``'s top event.

    The default ordering lists basic events depth-first, left to right, in
    order of first appearance.
    """
    events = ft.basic_event_order()
    if ordering is None:
        ordering = events
    else:
        ordering = list(ordering)
        extra = sorted(set(ordering) - set(events))
        missing = sorted(set(events) - set(ordering))
        if extra or missing or len(ordering) != len(set(ordering)):
            raise OrderingError(f"ordering mismatch for {ft.id}: missing {missing}, unexpected {extra}")
    bdd = Bdd(ordering)
    done: dict[str, int] = {}

    def build(name: str) -> int:
        if name not in ft.gates:
            return bdd.var(name)
        if name in done:
            return done[name]
        gate = ft.gates[name]
        op = "and" if gate.kind == "AND" else "or"
        acc = build(gate.inputs[0])
        for child in gate.inputs[1:]:
            acc = bdd.apply(op, acc, build(child))
        done[name] = acc
        return acc

    bdd.root = build(ft.root)
    return bdd


def enumerate_paths(bdd: Bdd, terminal: int = TRUE, limit: int = PATH_LIMIT, u: int | None = None) -> list[FailurePath]:
    count = bdd.count_paths(terminal, u)
    if count > limit:
        raise PathLimitError(f"{count} paths to terminal {terminal} exceed the limit of {limit}")
    return list(bdd.iter_paths(terminal, u))
