"""Model language: basic events, fault trees, event trees, dependency groups.

Models are JSON documents; the schema ships as ``deptree/data/model.schema.json``
and is described in the README. :func:`parse_model` checks the schema first,
then cross-references, and reports every problem it finds at once.
"""

from __future__ import annotations

import itertools
import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import CycleError, GroupStraddleError, ModelError, ModelSyntaxError, ValidationErrors
from .joint import JointTable
from .markov import MarkovModel
from .petri import StochasticPetriNet

INDEPENDENT = "DG0"
GATE_KINDS = ("AND", "OR")
MAX_BRANCH_POINTS = 20


@dataclass(frozen=True)
class Series:
    """Unavailability ``q`` and failure intensity ``w`` tabulated over time."""

    times: tuple[float, ...]
    q: tuple[float, ...]
    w: tuple[float, ...]

    def at(self, t: float | None) -> tuple[float, float]:
        if t is None:
            return self.q[-1], self.w[-1]
        return float(np.interp(t, self.times, self.q)), float(np.interp(t, self.times, self.w))

    def to_dict(self) -> dict:
        return {"times": list(self.times), "q": list(self.q), "w": list(self.w)}


@dataclass(frozen=True)
class BasicEvent:
    """A fault-tree leaf.

    The failure model is one of: a fixed ``probability`` (optionally with a
    ``frequency``), constant ``failure_rate``/``repair_rate`` (per hour;
    repair rate 0 or absent means non-repairable), or a tabulated ``series``.
    Members of a dependency group may omit the failure model because the
    group source provides their probabilities.
    """

    id: str
    probability: float | None = None
    frequency: float | None = None
    failure_rate: float | None = None
    repair_rate: float | None = None
    series: Series | None = None
    group: str | None = None
    source_tree: str | None = None

    @property
    def kind(self) -> str | None:
        if self.series is not None:
            return "series"
        if self.failure_rate is not None:
            return "rates"
        if self.probability is not None:
            return "probability"
        return None

    @property
    def repairable(self) -> bool:
        return self.kind == "rates" and bool(self.repair_rate)

    def unavailability(self, t: float | None = None) -> float:
        """q(t); ``t=None`` means steady state (or the fixed value)."""
        kind = self.kind
        if kind == "probability":
            return self.probability
        if kind == "series":
            return self.series.at(t)[0]
        if kind == "rates":
            lam = self.failure_rate
            nu = self.repair_rate or 0.0
            if nu > 0:
                if t is None:
                    return lam / (lam + nu)
                return lam / (lam + nu) * -math.expm1(-(lam + nu) * t)
            if t is None:
                raise ModelError(f"non-repairable event {self.id} needs an evaluation time")
            return -math.expm1(-lam * t)
        raise ModelError(f"event {self.id} has no failure model")

    def intensity(self, t: float | None = None) -> float:
        """Unconditional failure intensity w(t) (per hour)."""
        kind = self.kind
        if kind == "probability":
            return self.frequency or 0.0
        if kind == "series":
            return self.series.at(t)[1]
        if kind == "rates":
            return self.failure_rate * (1.0 - self.unavailability(t))
        raise ModelError(f"event {self.id} has no failure model")

    def to_dict(self) -> dict:
        out: dict = {}
        for name in ("probability", "frequency", "failure_rate", "repair_rate"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.series is not None:
            out["series"] = self.series.to_dict()
        if self.source_tree is not None:
            out["source_tree"] = self.source_tree
        return out


@dataclass(frozen=True)
class Gate:
    id: str
    kind: str
    inputs: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"type": self.kind, "inputs": list(self.inputs)}


@dataclass(frozen=True)
class TableSource:
    probs: tuple[float, ...]
    freqs: tuple[float, ...] | None = None
    flows: tuple[tuple[float, ...], ...] | None = None

    def to_dict(self) -> dict:
        out: dict = {"probs": list(self.probs)}
        if self.freqs is not None:
            out["freqs"] = list(self.freqs)
        if self.flows is not None:
            out["flows"] = [list(r) for r in self.flows]
        return {"table": out}


@dataclass(frozen=True)
class MarkovSource:
    model: str

    def to_dict(self) -> dict:
        return {"markov_model": self.model}


@dataclass(frozen=True)
class PetriSource:
    """Group probabilities from simulating a net.

    ``statistic`` is ``time_average`` (over ``[0, mission_time]``) or
    ``final`` (state at ``mission_time``). Unset simulation parameters fall
    back to the model mission time and to run-time options.
    """

    net: str
    mission_time: float | None = None
    replications: int | None = None
    seed: int | None = None
    statistic: str = "time_average"

    def to_dict(self) -> dict:
        out: dict = {"petri_net": self.net, "statistic": self.statistic}
        for name in ("mission_time", "replications", "seed"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out


@dataclass(frozen=True)
class DependencyGroupDecl:
    id: str
    members: tuple[str, ...]
    source: TableSource | MarkovSource | PetriSource

    def to_dict(self) -> dict:
        return {"members": list(self.members), **self.source.to_dict()}

    def table(self) -> JointTable:
        """Joint table of an inline-table group."""
        if not isinstance(self.source, TableSource):
            raise ModelError(f"group {self.id} is not backed by an inline table")
        src = self.source
        return JointTable(
            self.members,
            np.asarray(src.probs),
            freqs=None if src.freqs is None else np.asarray(src.freqs),
            flows=None if src.flows is None else np.asarray(src.flows),
            group=self.id,
        )


@dataclass(frozen=True)
class FaultTree:
    id: str
    root: str
    gates: Mapping[str, Gate]
    events: Mapping[str, BasicEvent]
    groups: Mapping[str, DependencyGroupDecl] = field(default_factory=dict)

    def is_gate(self, name: str) -> bool:
        return name in self.gates

    def basic_event_order(self, start: str | None = None) -> list[str]:
        """Basic events in depth-first, left-to-right order of first appearance."""
        order: list[str] = []
        seen: set[str] = set()
        visited: set[str] = set()

        def walk(node: str) -> None:
            if node in self.gates:
                if node in visited:
                    return
                visited.add(node)
                for child in self.gates[node].inputs:
                    walk(child)
            elif node not in seen:
                seen.add(node)
                order.append(node)

        walk(self.root if start is None else start)
        return order

    def reachable_gates(self, start: str | None = None) -> list[str]:
        out: list[str] = []
        stack = [self.root if start is None else start]
        seen: set[str] = set()
        while stack:
            node = stack.pop()
            if node in seen or node not in self.gates:
                continue
            seen.add(node)
            out.append(node)
            stack.extend(reversed(self.gates[node].inputs))
        return out

    def evaluate(self, assignment: Mapping[str, bool], node: str | None = None) -> bool:
        """Gate-by-gate evaluation; ``assignment`` maps event ids to states."""
        cache: dict[str, bool] = {}

        def value(name: str) -> bool:
            if name not in self.gates:
                return bool(assignment[name])
            if name not in cache:
                gate = self.gates[name]
                vals = (value(c) for c in gate.inputs)
                cache[name] = all(vals) if gate.kind == "AND" else any(vals)
            return cache[name]

        return value(self.root if node is None else node)

    def to_dict(self) -> dict:
        return {"root": self.root, "gates": {g: gate.to_dict() for g, gate in self.gates.items()}}


@dataclass(frozen=True)
class BranchPoint:
    """One heading of an event tree: a fault tree, a basic event or a fixed probability."""

    id: str
    fault_tree: str | None = None
    event: str | None = None
    probability: float | None = None

    def to_dict(self) -> dict:
        out: dict = {"id": self.id}
        for name in ("fault_tree", "event", "probability"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out


@dataclass(frozen=True)
class Sequence:
    """Branch outcomes (True = top event occurred) leading to a consequence."""

    outcomes: tuple[tuple[str, bool], ...]
    consequence: str

    def matches(self, assignment: Mapping[str, bool]) -> bool:
        return all(assignment[b] == v for b, v in self.outcomes)

    def to_dict(self) -> dict:
        return {"outcomes": dict(self.outcomes), "consequence": self.consequence}


@dataclass(frozen=True)
class EventTree:
    id: str
    initiating_event: str
    frequency: float
    branch_points: tuple[BranchPoint, ...]
    sequences: tuple[Sequence, ...]
    shared_sources: tuple[str, ...] = ()

    def consequences(self) -> list[str]:
        out: list[str] = []
        for s in self.sequences:
            if s.consequence not in out:
                out.append(s.consequence)
        return out

    def to_dict(self) -> dict:
        return {
            "initiating_event": {"id": self.initiating_event, "frequency": self.frequency},
            "branch_points": [b.to_dict() for b in self.branch_points],
            "sequences": [s.to_dict() for s in self.sequences],
            "shared_sources": list(self.shared_sources),
        }


@dataclass(frozen=True)
class SystemModel:
    basic_events: Mapping[str, BasicEvent]
    fault_trees: Mapping[str, FaultTree]
    event_trees: Mapping[str, EventTree] = field(default_factory=dict)
    dependency_groups: Mapping[str, DependencyGroupDecl] = field(default_factory=dict)
    markov_models: Mapping[str, MarkovModel] = field(default_factory=dict)
    petri_nets: Mapping[str, StochasticPetriNet] = field(default_factory=dict)
    time_grid: tuple[float, ...] = ()
    mission_time: float | None = None

    def group_of(self, event: str) -> str:
        ev = self.basic_events[event]
        return ev.group or INDEPENDENT

    def fault_tree(self, ft_id: str) -> FaultTree:
        try:
            return self.fault_trees[ft_id]
        except KeyError:
            raise ModelError(f"unknown fault tree {ft_id!r}") from None

    def to_dict(self) -> dict:
        out: dict = {"format_version": 1}
        if self.mission_time is not None:
            out["mission_time"] = self.mission_time
        if self.time_grid:
            out["time_grid"] = list(self.time_grid)
        out["basic_events"] = {e: ev.to_dict() for e, ev in self.basic_events.items()}
        out["fault_trees"] = {f: ft.to_dict() for f, ft in self.fault_trees.items()}
        out["event_trees"] = {e: et.to_dict() for e, et in self.event_trees.items()}
        out["dependency_groups"] = {g: d.to_dict() for g, d in self.dependency_groups.items()}
        out["markov_models"] = {m: mm.to_dict() for m, mm in self.markov_models.items()}
        out["petri_nets"] = {p: pn.to_dict() for p, pn in self.petri_nets.items()}
        return out


def dumps(model: SystemModel) -> str:
    return json.dumps(model.to_dict(), indent=2) + "\n"


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(resources.files("deptree").joinpath("data/model.schema.json").read_text())


def parse_model(text: str) -> SystemModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    return build_model(data)


def load_model(path: str | Path) -> SystemModel:
    return parse_model(Path(path).read_text(encoding="utf-8"))


def _pointer(path: Iterable) -> str:
    return "/" + "/".join(str(p) for p in path)


def _check_schema(data) -> None:
    import jsonschema

    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ValidationErrors([ModelError(e.message, _pointer(e.absolute_path)) for e in errors])


def _find_cycle(gates: Mapping[str, Gate]) -> list[str] | None:
    colour: dict[str, int] = {}
    stack: list[str] = []

    def visit(g: str) -> list[str] | None:
        colour[g] = 1
        stack.append(g)
        for child in gates[g].inputs:
            if child not in gates:
                continue
            if colour.get(child) == 1:
                return stack[stack.index(child):] + [child]
            if child not in colour:
                found = visit(child)
                if found:
                    return found
        colour[g] = 2
        stack.pop()
        return None

    for g in gates:
        if g not in colour:
            found = visit(g)
            if found:
                return found
    return None


def check_partition(et: EventTree) -> list[str]:
    """Problems with how the sequences cover the branch outcome space."""
    ids = [b.id for b in et.branch_points]
    if len(ids) > MAX_BRANCH_POINTS:
        return [f"more than {MAX_BRANCH_POINTS} branch points"]
    problems = []
    for combo in itertools.product((False, True), repeat=len(ids)):
        assignment = dict(zip(ids, combo))
        hits = [s.consequence for s in et.sequences if s.matches(assignment)]
        if len(hits) != 1:
            label = ",".join(f"{k}={'T' if v else 'F'}" for k, v in assignment.items())
            what = "no consequence" if not hits else f"several consequences {hits}"
            problems.append(f"outcome path {label} has {what}")
    return problems


def build_model(data: Mapping) -> SystemModel:
    """Validate a decoded JSON document and build the cross-linked model."""
    _check_schema(data)
    errors: list[ModelError] = []

    def err(message: str, *path) -> None:
        errors.append(ModelError(message, _pointer(path)))

    # basic events
    events: dict[str, BasicEvent] = {}
    for eid, raw in data.get("basic_events", {}).items():
        kinds = [k for k in ("probability", "failure_rate", "series") if k in raw]
        if len(kinds) > 1:
            err(f"conflicting failure models {kinds}", "basic_events", eid)
            continue
        if "repair_rate" in raw and "failure_rate" not in raw:
            err("repair_rate without failure_rate", "basic_events", eid)
        p = raw.get("probability")
        if p is not None and not 0.0 <= p <= 1.0:
            err(f"probability out of [0, 1]: {p}", "basic_events", eid, "probability")
            continue
        series = None
        if "series" in raw:
            s = raw["series"]
            times, q, w = (tuple(float(x) for x in s[k]) for k in ("times", "q", "w"))
            if not len(times) == len(q) == len(w):
                err("series arrays differ in length", "basic_events", eid, "series")
                continue
            if any(b <= a for a, b in zip(times, times[1:])):
                err("series times must increase strictly", "basic_events", eid, "series")
            if any(not 0.0 <= x <= 1.0 for x in q):
                err("series probability out of [0, 1]", "basic_events", eid, "series")
            if any(x < 0 for x in w):
                err("series intensities must be non-negative", "basic_events", eid, "series")
            series = Series(times, q, w)
        events[eid] = BasicEvent(
            id=eid,
            probability=p,
            frequency=raw.get("frequency"),
            failure_rate=raw.get("failure_rate"),
            repair_rate=raw.get("repair_rate"),
            series=series,
            source_tree=raw.get("source_tree"),
        )

    # time grid
    grid = tuple(float(t) for t in data.get("time_grid", ()))
    if any(b <= a for a, b in zip(grid, grid[1:])):
        err("time grid must be strictly increasing", "time_grid")
    mission = data.get("mission_time")
    if grid and mission is not None and grid[-1] != mission:
        err(f"last grid point {grid[-1]} differs from mission time {mission}", "time_grid")
    if mission is None and grid:
        mission = grid[-1]

    # Markov models and nets
    markov: dict[str, MarkovModel] = {}
    for mid, raw in data.get("markov_models", {}).items():
        try:
            mm = MarkovModel(
                states=tuple(raw["states"]),
                transitions=tuple((t["from"], t["to"], float(t["rate"])) for t in raw["transitions"]),
                members=tuple(raw["members"]),
                state_map={s: tuple(v) for s, v in raw["state_map"].items()},
                initial=raw.get("initial"),
            )
        except ModelError as exc:
            err(exc.message, "markov_models", mid)
            continue
        unmapped = [s for s in mm.states if s not in mm.state_map]
        if unmapped:
            err(f"unmapped state(s) {unmapped}", "markov_models", mid, "state_map")
        markov[mid] = mm
    nets: dict[str, StochasticPetriNet] = {}
    for nid, raw in data.get("petri_nets", {}).items():
        try:
            nets[nid] = StochasticPetriNet.from_dict(raw)
        except (ModelError, KeyError) as exc:
            err(str(exc), "petri_nets", nid)

    # dependency groups
    groups: dict[str, DependencyGroupDecl] = {}
    owner: dict[str, str] = {}
    for gid, raw in data.get("dependency_groups", {}).items():
        if gid == INDEPENDENT:
            err(f"{INDEPENDENT} is reserved for independent events", "dependency_groups", gid)
            continue
        members = tuple(raw["members"])
        if len(set(members)) != len(members):
            err("duplicate members", "dependency_groups", gid, "members")
            continue
        bad = False
        for m in members:
            if m not in events:
                err(f"unknown member {m!r}", "dependency_groups", gid, "members")
                bad = True
            elif m in owner:
                err(f"event {m} in multiple dependency groups ({owner[m]}, {gid})", "dependency_groups", gid)
                bad = True
            else:
                owner[m] = gid
        if bad:
            continue
        if "table" in raw:
            t = raw["table"]
            source = TableSource(
                tuple(t["probs"]),
                None if "freqs" not in t else tuple(t["freqs"]),
                None if "flows" not in t else tuple(tuple(r) for r in t["flows"]),
            )
            decl = DependencyGroupDecl(gid, members, source)
            try:
                decl.table()
            except ModelError as exc:
                err(exc.message, "dependency_groups", gid, "table")
                continue
        elif "markov_model" in raw:
            ref = raw["markov_model"]
            if ref not in markov:
                err(f"unknown Markov model {ref!r}", "dependency_groups", gid, "markov_model")
                continue
            if markov[ref].members != members:
                err(f"Markov model {ref} maps members {list(markov[ref].members)}, group has {list(members)}",
                    "dependency_groups", gid)
                continue
            decl = DependencyGroupDecl(gid, members, MarkovSource(ref))
        else:
            ref = raw["petri_net"]
            if ref not in nets:
                err(f"unknown Petri net {ref!r}", "dependency_groups", gid, "petri_net")
                continue
            if nets[ref].members != members:
                err(f"Petri net {ref} maps members {list(nets[ref].members)}, group has {list(members)}",
                    "dependency_groups", gid)
                continue
            decl = DependencyGroupDecl(
                gid,
                members,
                PetriSource(ref, raw.get("mission_time"), raw.get("replications"), raw.get("seed"),
                            raw.get("statistic", "time_average")),
            )
        groups[gid] = decl
    for m, gid in owner.items():
        if m in events:
            events[m] = replace(events[m], group=gid)

    # fault trees
    trees: dict[str, FaultTree] = {}
    for fid, raw in data.get("fault_trees", {}).items():
        gates: dict[str, Gate] = {}
        ok = True
        for gid, g in raw["gates"].items():
            kind = g["type"].upper()
            if kind not in GATE_KINDS:
                hint = " (k-of-n/voting gates must be expanded into AND/OR)" if kind in (
                    "VOTE", "VOTING", "KOFN", "K/N", "ATLEAST", "KN") else ""
                err(f"unsupported gate type {g['type']!r}; only AND and OR are allowed{hint}",
                    "fault_trees", fid, "gates", gid)
                ok = False
            if gid in events:
                err(f"identifier {gid} used both as gate and basic event", "fault_trees", fid, "gates", gid)
                ok = False
            gates[gid] = Gate(gid, kind, tuple(g["inputs"]))
        for gid, gate in gates.items():
            for child in gate.inputs:
                if child not in gates and child not in events:
                    err(f"dangling reference {child!r}", "fault_trees", fid, "gates", gid)
                    ok = False
        root = raw["root"]
        if root not in gates:
            err(f"root {root!r} is not a gate of this tree", "fault_trees", fid, "root")
            ok = False
        if not ok:
            continue
        cycle = _find_cycle(gates)
        if cycle:
            errors.append(CycleError(cycle, _pointer(("fault_trees", fid))))
            continue
        tree = FaultTree(fid, root, gates, {})
        unreachable = [g for g in gates if g not in set(tree.reachable_gates())]
        if unreachable:
            err(f"gate(s) {unreachable} unreachable from root {root}", "fault_trees", fid)
            continue
        used = tree.basic_event_order()
        touching = {events[e].group for e in used if events[e].group}
        trees[fid] = FaultTree(
            fid, root, gates, {e: events[e] for e in used}, {g: groups[g] for g in sorted(touching) if g in groups}
        )

    # event trees
    ets: dict[str, EventTree] = {}
    for eid, raw in data.get("event_trees", {}).items():
        freq = raw["initiating_event"]["frequency"]
        if freq < 0:
            err("initiating-event frequency must be >= 0", "event_trees", eid, "initiating_event")
        bps = []
        for i, b in enumerate(raw["branch_points"]):
            refs = [k for k in ("fault_tree", "event", "probability") if k in b]
            if len(refs) != 1:
                err("branch point needs exactly one of fault_tree, event, probability", "event_trees", eid,
                    "branch_points", i)
                continue
            if "fault_tree" in b and b["fault_tree"] not in data.get("fault_trees", {}):
                err(f"unknown fault tree {b['fault_tree']!r}", "event_trees", eid, "branch_points", i)
            if "event" in b and b["event"] not in events:
                err(f"unknown basic event {b['event']!r}", "event_trees", eid, "branch_points", i)
            if "probability" in b and not 0.0 <= b["probability"] <= 1.0:
                err(f"probability out of [0, 1]: {b['probability']}", "event_trees", eid, "branch_points", i)
            bps.append(BranchPoint(b["id"], b.get("fault_tree"), b.get("event"), b.get("probability")))
        ids = [b.id for b in bps]
        if len(set(ids)) != len(ids):
            err("duplicate branch point ids", "event_trees", eid, "branch_points")
        seqs = []
        for i, s in enumerate(raw["sequences"]):
            unknown = [k for k in s["outcomes"] if k not in ids]
            if unknown:
                err(f"unknown branch point(s) {unknown}", "event_trees", eid, "sequences", i)
            seqs.append(Sequence(tuple(s["outcomes"].items()), s["consequence"]))
        shared = tuple(raw.get("shared_sources", ()))
        for src in shared:
            if src not in events:
                err(f"unknown shared source {src!r}", "event_trees", eid, "shared_sources")
        et = EventTree(eid, raw["initiating_event"]["id"], float(freq), tuple(bps), tuple(seqs), shared)
        if not any(e.location and e.location.startswith(f"/event_trees/{eid}") for e in errors):
            for problem in check_partition(et):
                err(problem, "event_trees", eid, "sequences")
        ets[eid] = et

    # every event that must be quantified needs a model or a group
    needed: set[str] = set()
    for tree in trees.values():
        needed.update(tree.events)
    for et in ets.values():
        needed.update(b.event for b in et.branch_points if b.event)
        needed.update(et.shared_sources)
    for e in sorted(needed):
        if e in events and events[e].kind is None and events[e].group is None:
            err(f"event {e} has no failure model and no dependency group", "basic_events", e)

    if errors:
        raise ValidationErrors(errors)
    return SystemModel(
        basic_events=events,
        fault_trees=trees,
        event_trees=ets,
        dependency_groups=groups,
        markov_models=markov,
        petri_nets=nets,
        time_grid=grid,
        mission_time=mission,
    )


def extract_subtree(ft: FaultTree, gate: str) -> FaultTree:
    """Self-contained fault tree rooted at ``gate``.

    Dependency groups entirely inside the sub-tree come along; a group with
    members on both sides of the boundary raises :class:`GroupStraddleError`.
    """
    if gate not in ft.gates:
        raise ModelError(f"unknown gate {gate!r} in fault tree {ft.id}")
    if gate == ft.root:
        return ft
    gates = {g: ft.gates[g] for g in ft.reachable_gates(gate)}
    used = ft.basic_event_order(gate)
    inside = set(used)
    groups = {}
    for gid, decl in ft.groups.items():
        members = set(decl.members)
        if members & inside:
            if not members <= inside:
                outside = sorted(members - inside)
                raise GroupStraddleError(
                    f"dependency group {gid} straddles sub-tree {gate}: {outside} lie outside it; "
                    "reduce at group level or regroup the events"
                )
            groups[gid] = decl
    # keep the parent's gate order for a stable serialization
    ordered = {g: gates[g] for g in ft.gates if g in gates}
    return FaultTree(gate, gate, ordered, {e: ft.events[e] for e in used}, groups)


def replace_fault_tree(model: SystemModel, ft: FaultTree, **changes) -> SystemModel:
    trees = dict(model.fault_trees)
    trees[ft.id] = ft
    return replace(model, fault_trees=trees, **changes)
