"""Replace dependent intermediate events by equivalent complex basic events.

For every selected gate the sub-tree is quantified over the time grid
(unavailability Q and failure intensity W), converted to failure/repair
rates, and from those to the transition distributions of a two-place
template net. Template nets of gates that interact are joined with coupling
arcs; the resulting net becomes the source of a new dependency group over
the complex events. Gates that are not coupled to anything keep their
tabulated Q/W and enter the reduced tree as ordinary independent events.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace

import numpy as np

from .bdd import build_bdd
from .errors import AnalysisError, ModelError
from .joint import JointTable
from .model import (
    BasicEvent,
    DependencyGroupDecl,
    FaultTree,
    Gate,
    PetriSource,
    Series,
    SystemModel,
    extract_subtree,
)
from .petri import (
    Coupling,
    Distribution,
    Empirical,
    Exponential,
    StochasticPetriNet,
    build_template_net,
    combine_nets,
)
from .quantify import EventMeasure, top_frequency, top_probability

CONSTANT_RATE_TOL = 1e-6


@dataclass(frozen=True)
class TimeSeriesMetrics:
    times: np.ndarray
    q: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class RateVectors:
    """Failure and repair rates on the grid; NaN where a rate is undefined."""

    times: np.ndarray
    failure: np.ndarray
    repair: np.ndarray


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    times = np.asarray(grid, dtype=float)
    if times.size == 0:
        raise ModelError("empty time grid")
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ModelError("time grid must be non-negative and strictly increasing")
    return times


def subtree_metrics(
    sub: FaultTree,
    grid: Sequence[float],
    tables: Mapping[str, JointTable] | None = None,
    reversible: bool | None = None,
) -> TimeSeriesMetrics:
    """Q(E, t_i) and W(E, t_i) of a sub-tree's top event on ``grid``.

    Dependency groups inside the sub-tree need their joint tables in
    ``tables``; those tables are taken as time-invariant, and their
    transition flows supply the group part of W.
    """
    times = _check_grid(grid)
    tables = dict(tables or {})
    if reversible is None:
        reversible = any(ev.repairable for ev in sub.events.values())
    independent = [e for e, ev in sub.events.items() if ev.group is None or ev.group not in tables]
    if reversible:
        fixed = [e for e in independent if sub.events[e].kind == "probability"]
        if fixed:
            raise AnalysisError(
                f"events {fixed} have a fixed probability and no rates; reduce {sub.id} in irreversible mode"
            )
    bdd = build_bdd(sub)
    q = np.empty(times.size)
    w = np.empty(times.size)
    for i, t in enumerate(times):
        marg = {e: sub.events[e].unavailability(t) for e in independent}
        inten = {e: sub.events[e].intensity(t) for e in independent}
        measure = EventMeasure(tables, marg)
        q[i] = top_probability(bdd, measure)
        w[i] = top_frequency(bdd, measure, intensities=inten)
    return TimeSeriesMetrics(times, q, w)


def derive_rates(ts: TimeSeriesMetrics) -> RateVectors:
    """lambda = W / (1 - Q) and nu = W / Q at every grid point.

    nu at the first grid point is left undefined (NaN) when Q is zero there.
    """
    q = np.asarray(ts.q, dtype=float)
    w = np.asarray(ts.w, dtype=float)
    if np.any(q >= 1.0):
        i = int(np.argmax(q >= 1.0))
        raise AnalysisError(f"failure rate undefined: Q = 1 at t = {ts.times[i]}")
    zero = np.nonzero(q <= 0.0)[0]
    if zero.size and (zero.size > 1 or zero[0] != 0):
        i = int(zero[-1])
        raise AnalysisError(f"repair rate undefined: Q = 0 at t = {ts.times[i]}")
    failure = w / (1.0 - q)
    with np.errstate(divide="ignore", invalid="ignore"):
        repair = np.where(q > 0.0, w / np.where(q > 0.0, q, 1.0), np.nan)
    return RateVectors(np.asarray(ts.times, dtype=float), failure, repair)


def is_constant(values: np.ndarray, tol: float = CONSTANT_RATE_TOL) -> bool:
    v = values[np.isfinite(values)]
    if v.size == 0:
        return False
    ref = float(np.mean(v))
    if ref == 0.0:
        return bool(np.all(v == 0.0))
    return bool(np.max(np.abs(v - ref)) / abs(ref) <= tol)


def empirical_from_rates(times: np.ndarray, rates: np.ndarray) -> Empirical:
    """CDF support points from densities ``r(t_i) * exp(-r(t_i) * t_i)``.

    Densities are integrated with the trapezoidal rule from time 0 and the
    CDF is clipped at 1. Undefined rates take the nearest defined value.
    """
    times = np.asarray(times, dtype=float)
    rates = np.asarray(rates, dtype=float)
    ok = np.isfinite(rates)
    if not ok.any():
        raise AnalysisError("no defined rate on the grid")
    filled = np.interp(times, times[ok], rates[ok])
    if times[0] > 0.0:
        times = np.concatenate([[0.0], times])
        filled = np.concatenate([[filled[0]], filled])
    density = filled * np.exp(-filled * times)
    steps = 0.5 * (density[1:] + density[:-1]) * np.diff(times)
    cdf = np.concatenate([[0.0], np.cumsum(steps)])
    cdf = np.minimum(np.maximum.accumulate(cdf), 1.0)
    return Empirical(tuple(times), tuple(cdf))


def build_transition_distributions(
    rates: RateVectors,
    grid: Sequence[float] | None = None,
    unavailability: Sequence[float] | None = None,
) -> tuple[Distribution, Distribution | None]:
    """Failure and repair distributions of a template net.

    With ``unavailability`` given the event is irreversible: the failure CDF
    is the sub-tree unavailability itself (exponential when the failure rate
    is constant) and there is no repair transition.
    """
    times = _check_grid(rates.times if grid is None else grid)
    lam = np.asarray(rates.failure, dtype=float)
    if unavailability is not None:
        if is_constant(lam):
            return Exponential(float(np.mean(lam))), None
        q = np.clip(np.asarray(unavailability, dtype=float), 0.0, 1.0)
        q = np.maximum.accumulate(q)
        if times[0] > 0.0:
            times = np.concatenate([[0.0], times])
            q = np.concatenate([[0.0], q])
        return Empirical(tuple(times), tuple(q)), None
    failure = Exponential(float(np.mean(lam))) if is_constant(lam) else empirical_from_rates(times, lam)
    nu = np.asarray(rates.repair, dtype=float)
    if is_constant(nu):
        repair: Distribution = Exponential(float(np.mean(nu[np.isfinite(nu)])))
    else:
        repair = empirical_from_rates(times, nu)
    return failure, repair


@dataclass(frozen=True)
class ComplexEvent:
    id: str
    source_tree: str
    group: str | None
    event: BasicEvent
    reversible: bool


@dataclass(frozen=True)
class Reduction:
    fault_tree: FaultTree
    net: StochasticPetriNet | None
    group: DependencyGroupDecl | None
    complex_events: dict[str, ComplexEvent]
    metrics: dict[str, TimeSeriesMetrics]
    rates: dict[str, RateVectors]
    distributions: dict[str, tuple[Distribution, Distribution | None]]


def _coupled_gates(gates: Sequence[str], couplings: Sequence[Coupling]) -> list[str]:
    named = set()
    for c in couplings:
        for ref in (c.place, c.transition):
            named.add(ref.rsplit(".", 1)[0])
    unknown = named - set(gates)
    if unknown:
        raise ModelError(f"coupling refers to sub-nets {sorted(unknown)} that are not being reduced")
    return [g for g in gates if g in named]


def reduce_intermediate(
    ft: FaultTree,
    gates: Sequence[str],
    couplings: Sequence[Coupling] = (),
    grid: Sequence[float] = (),
    tables: Mapping[str, JointTable] | None = None,
    group_id: str = "DG_R",
    net_id: str = "PN_R",
    replications: int | None = None,
    seed: int | None = None,
) -> Reduction:
    """Reduce the sub-trees under ``gates`` to complex events.

    ``couplings`` connect the template nets (places ``<gate>.E`` and
    ``<gate>.Ebar``, transitions ``<gate>.F`` and ``<gate>.R``). ``tables``
    supplies joint tables for dependency groups inside the sub-trees.
    """
    gates = list(gates)
    if not gates:
        raise ModelError("no gates to reduce")
    if len(set(gates)) != len(gates):
        raise ModelError("a gate is listed twice")
    for g in gates:
        if g not in ft.gates:
            raise ModelError(f"unknown gate {g!r} in fault tree {ft.id}")
        if g == ft.root:
            raise ModelError(f"cannot reduce the root gate {g} of {ft.id}")
    subs = {g: extract_subtree(ft, g) for g in gates}
    for i, a in enumerate(gates):
        for b in gates[i + 1:]:
            shared = (set(subs[a].gates) | set(subs[a].events)) & (set(subs[b].gates) | set(subs[b].events))
            if shared:
                raise ModelError(f"overlapping sub-trees {a} and {b} share {sorted(shared)}")

    # reduced structure: walk from the root, stopping at reduced gates
    kept: dict[str, Gate] = {}
    stack = [ft.root]
    while stack:
        node = stack.pop()
        if node in kept or node in gates or node not in ft.gates:
            continue
        kept[node] = ft.gates[node]
        stack.extend(ft.gates[node].inputs)
    kept = {g: kept[g] for g in ft.gates if g in kept}
    outside_events: set[str] = set()
    for gate in kept.values():
        outside_events.update(c for c in gate.inputs if c not in ft.gates)
    for g, sub in subs.items():
        inner_gates = set(sub.gates) - {g}
        leak = inner_gates & set(kept)
        if leak:
            raise ModelError(f"gate(s) {sorted(leak)} inside sub-tree {g} are also used outside it")
        leak = set(sub.events) & outside_events
        if leak:
            raise ModelError(
                f"basic event(s) {sorted(leak)} appear both inside sub-tree {g} and elsewhere; "
                "this case is not handled by the reduction"
            )

    couplings = list(couplings)
    coupled = _coupled_gates(gates, couplings)
    times = _check_grid(grid)
    metrics: dict[str, TimeSeriesMetrics] = {}
    rates: dict[str, RateVectors] = {}
    dists: dict[str, tuple[Distribution, Distribution | None]] = {}
    complex_events: dict[str, ComplexEvent] = {}
    for g in gates:
        sub = subs[g]
        reversible = any(ev.repairable for ev in sub.events.values())
        inner = {gid: tables[gid] for gid in sub.groups if tables and gid in tables}
        missing = [gid for gid in sub.groups if gid not in inner]
        if missing:
            raise ModelError(f"joint tables needed for group(s) {missing} inside sub-tree {g}")
        ts = subtree_metrics(sub, times, inner, reversible=reversible)
        rv = derive_rates(ts)
        dist = build_transition_distributions(rv, times, None if reversible else ts.q)
        metrics[g], rates[g], dists[g] = ts, rv, dist
        grp = group_id if g in coupled else None
        event = BasicEvent(
            id=g,
            series=Series(tuple(times.tolist()), tuple(ts.q.tolist()), tuple(ts.w.tolist())),
            group=grp,
            source_tree=ft.id,
        )
        complex_events[g] = ComplexEvent(g, ft.id, grp, event, reversible)

    net = None
    group = None
    if coupled:
        nets = [build_template_net(g, *dists[g]) for g in coupled]
        net = combine_nets(nets, couplings)
        group = DependencyGroupDecl(
            group_id,
            tuple(coupled),
            PetriSource(net_id, float(times[-1]), replications, seed, "final"),
        )

    events = {}
    for gate in kept.values():
        for c in gate.inputs:
            if c in complex_events:
                events[c] = complex_events[c].event
            elif c not in ft.gates:
                events[c] = ft.events[c]
    order = [e for e in FaultTree(ft.id, ft.root, kept, {}).basic_event_order()]
    events = {e: events[e] for e in order}
    groups = {gid: d for gid, d in ft.groups.items() if set(d.members) & set(events)}
    if group is not None:
        groups[group.id] = group
    reduced = FaultTree(ft.id, ft.root, kept, events, groups)
    return Reduction(reduced, net, group, complex_events, metrics, rates, dists)


def reduce_model(
    model: SystemModel,
    ft_id: str,
    gates: Sequence[str],
    couplings: Sequence[Coupling] = (),
    grid: Sequence[float] | None = None,
    replications: int | None = None,
    seed: int | None = None,
    tables: Mapping[str, JointTable] | None = None,
    sim=None,
) -> tuple[SystemModel, Reduction]:
    """Apply :func:`reduce_intermediate` inside a model and return the new model."""
    ft = model.fault_tree(ft_id)
    grid = tuple(model.time_grid) if grid is None else tuple(grid)
    if not grid:
        raise ModelError("reduction needs a time grid")
    n = 1
    while f"DG{n}" in model.dependency_groups:
        n += 1
    group_id = f"DG{n}"
    net_id = f"PN_{ft_id}_reduced"
    if net_id in model.petri_nets:
        raise ModelError(f"model already has a net named {net_id}")
    if tables is None:
        from .analysis import group_table

        tables = {}
        for g in gates:
            if g not in ft.gates or g == ft.root:
                continue  # reported by reduce_intermediate
            for gid in extract_subtree(ft, g).groups:
                tables[gid] = group_table(model, gid, sim)
    red = reduce_intermediate(ft, gates, couplings, grid, tables, group_id, net_id, replications, seed)
    clash = [g for g in red.complex_events if g in model.basic_events]
    if clash:
        raise ModelError(f"complex event id(s) {clash} already used by basic events")
    events = dict(model.basic_events)
    for g, ce in red.complex_events.items():
        events[g] = ce.event
    trees = dict(model.fault_trees)
    trees[ft_id] = red.fault_tree
    for other in trees.values():
        clash = set(other.gates) & set(red.complex_events)
        if clash and other.id != ft_id:
            raise ModelError(f"fault tree {other.id} has gates named like complex events {sorted(clash)}")
    groups = dict(model.dependency_groups)
    nets = dict(model.petri_nets)
    if red.group is not None:
        groups[red.group.id] = red.group
        nets[net_id] = red.net
    new = replace(
        model,
        basic_events=events,
        fault_trees=trees,
        dependency_groups=groups,
        petri_nets=nets,
        time_grid=grid,
        mission_time=model.mission_time if model.mission_time is not None else grid[-1],
    )
    return new, red


__all__ = [
    "ComplexEvent",
    "Reduction",
    "RateVectors",
    "TimeSeriesMetrics",
    "build_transition_distributions",
    "derive_rates",
    "empirical_from_rates",
    "reduce_intermediate",
    "reduce_model",
    "subtree_metrics",
]
