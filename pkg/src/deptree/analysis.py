"""Glue between a :class:`SystemModel` and the quantification modules.

Resolves dependency-group sources into joint tables and evaluates basic
events at a given time.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

from .errors import ModelError
from .joint import JointTable
from .markov import mm_steady_state, mm_to_joint
from .model import INDEPENDENT, MarkovSource, PetriSource, SystemModel, TableSource
from .petri import spn_simulate
from .quantify import EventMeasure


class SimulationOptions:
    """Run-time fallbacks for Petri-net sourced groups."""

    def __init__(self, seed: int | None = None, replications: int | None = None, workers: int = 1):
        self.seed = seed
        self.replications = replications
        self.workers = workers


def _petri_params(model: SystemModel, gid: str, src: PetriSource, sim: SimulationOptions):
    mission = src.mission_time if src.mission_time is not None else model.mission_time
    if mission is None:
        raise ModelError(f"group {gid}: no mission time for net simulation")
    seed = sim.seed if sim.seed is not None else src.seed
    if seed is None:
        raise ModelError(f"group {gid}: a seed is required to simulate {src.net}")
    reps = sim.replications if sim.replications is not None else src.replications
    if reps is None:
        raise ModelError(f"group {gid}: number of replications not given")
    return float(mission), int(seed), int(reps)


def group_table(model: SystemModel, gid: str, sim: SimulationOptions | None = None,
                t: float | None = None) -> JointTable:
    """Joint table of group ``gid``.

    For nets read at a single instant (``statistic: final``) ``t`` picks the
    instant; it defaults to the group's mission time.
    """
    sim = sim or SimulationOptions()
    decl = model.dependency_groups[gid]
    src = decl.source
    if isinstance(src, TableSource):
        return decl.table()
    if isinstance(src, MarkovSource):
        mm = model.markov_models[src.model]
        return mm_to_joint(mm, mm_steady_state(mm), group=gid)
    mission, seed, reps = _petri_params(model, gid, src, sim)
    net = model.petri_nets[src.net]
    if src.statistic == "final":
        at = mission if t is None else float(t)
        if not 0.0 <= at <= mission:
            raise ModelError(f"group {gid}: time {at} outside the simulated interval [0, {mission}]")
        stats = spn_simulate(net, mission, reps, seed, observe_times=[at], workers=sim.workers)
        return stats.table(at=0, group=gid)
    stats = spn_simulate(net, mission, reps, seed, workers=sim.workers)
    return stats.table(group=gid)


def groups_touching(model: SystemModel, events: Iterable[str]) -> list[str]:
    return sorted({model.group_of(e) for e in events} - {INDEPENDENT})


def group_tables(model: SystemModel, gids: Iterable[str], sim: SimulationOptions | None = None,
                 t: float | None = None) -> dict[str, JointTable]:
    return {g: group_table(model, g, sim, t) for g in gids}


def marginals_at(model: SystemModel, events: Iterable[str], t: float | None = None) -> dict[str, float]:
    """q(t) of the independent events among ``events``."""
    return {e: model.basic_events[e].unavailability(t) for e in events if model.group_of(e) == INDEPENDENT}


def intensities_at(model: SystemModel, events: Iterable[str], t: float | None = None) -> dict[str, float]:
    return {e: model.basic_events[e].intensity(t) for e in events if model.group_of(e) == INDEPENDENT}


def default_time(model: SystemModel, events: Iterable[str]) -> float | None:
    """Mission time when some independent event is non-repairable, else steady state."""
    for e in events:
        ev = model.basic_events[e]
        if model.group_of(e) == INDEPENDENT and ev.kind == "rates" and not ev.repair_rate:
            if model.mission_time is None:
                raise ModelError(f"non-repairable event {e} needs a mission time")
            return model.mission_time
        if model.group_of(e) == INDEPENDENT and ev.kind == "series":
            return model.mission_time
    return None


def measure_for(model: SystemModel, events: Sequence[str], t: float | None = None,
                sim: SimulationOptions | None = None) -> EventMeasure:
    tables = group_tables(model, groups_touching(model, events), sim, t)
    return EventMeasure(tables, marginals_at(model, events, t))


def top_probability_series(model: SystemModel, ft_id: str, times: Sequence[float],
                           sim: SimulationOptions | None = None) -> np.ndarray:
    """Q(TOP, t) at each time.

    Petri-net groups are simulated once over ``[0, max(times)]`` and read at
    every observation time; Markov and inline tables are time-invariant.
    """
    from .bdd import build_bdd
    from .quantify import top_probability

    sim = sim or SimulationOptions()
    ft = model.fault_tree(ft_id)
    events = ft.basic_event_order()
    bdd = build_bdd(ft)
    times = [float(t) for t in times]
    fixed: dict[str, JointTable] = {}
    series: dict[str, list[JointTable]] = {}
    for gid in groups_touching(model, events):
        src = model.dependency_groups[gid].source
        if isinstance(src, PetriSource):
            _, seed, reps = _petri_params(model, gid, src, sim)
            net = model.petri_nets[src.net]
            stats = spn_simulate(net, max(times), reps, seed, observe_times=times, workers=sim.workers)
            series[gid] = [stats.table(at=j, group=gid) for j in range(len(times))]
        else:
            fixed[gid] = group_table(model, gid, sim)
    out = []
    for j, t in enumerate(times):
        tables = dict(fixed)
        tables.update({g: s[j] for g, s in series.items()})
        out.append(top_probability(bdd, EventMeasure(tables, marginals_at(model, events, t))))
    return np.array(out)
