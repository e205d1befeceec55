"""Stochastic Petri nets: definition, template construction, simulation.

Firing semantics
----------------
* All enabled timed transitions race; the earliest scheduled one fires.
* A transition's delay is sampled when it becomes enabled and discarded
  when it is disabled (no age memory). A transition that stays enabled
  across other firings keeps its scheduled time; the transition that fired
  is resampled if it is still enabled.
* Immediate transitions fire, in declaration order, before time advances.
* A transition is enabled when every input and test place holds at least
  the arc weight and every inhibitor place holds fewer tokens than the arc
  weight. Reset arcs empty their place when the transition fires.

Replication ``i`` draws from its own generator seeded with
``SeedSequence(seed, spawn_key=(i,))``, so results do not depend on how the
replications are split between workers.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import LivelockError, ModelError
from .joint import JointTable

LIVELOCK_CAP = 10_000
CHUNK = 256
_INF = math.inf


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not (self.rate >= 0.0 and math.isfinite(self.rate)):
            raise ModelError(f"exponential rate must be finite and >= 0, got {self.rate}")

    def sample(self, u: float) -> float:
        if self.rate == 0.0:
            return _INF
        return -math.log1p(-u) / self.rate

    def cdf(self, t):
        return 1.0 - np.exp(-self.rate * np.asarray(t, dtype=float))

    def to_dict(self) -> dict:
        return {"type": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Empirical:
    """Piecewise-linear CDF through ``(times[i], cdf[i])``.

    Probability mass above ``cdf[-1]`` never fires (censored beyond the last
    support time); mass ``cdf[0]`` fires at ``times[0]``.
    """

    times: tuple[float, ...]
    cdf_values: tuple[float, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.cdf_values, dtype=float)
        if t.size == 0 or t.size != f.size:
            raise ModelError("empirical distribution needs matching, non-empty support and CDF values")
        if np.any(np.diff(t) <= 0) or t[0] < 0:
            raise ModelError("empirical support times must be non-negative and strictly increasing")
        if np.any(np.diff(f) < 0) or f[0] < 0 or f[-1] > 1.0:
            raise ModelError("empirical CDF must be non-decreasing within [0, 1]")
        object.__setattr__(self, "times", tuple(float(x) for x in t))
        object.__setattr__(self, "cdf_values", tuple(float(x) for x in f))

    def sample(self, u: float) -> float:
        f = self.cdf_values
        if u >= f[-1]:
            return _INF
        if u <= f[0]:
            return self.times[0]
        i = bisect_left(f, u)
        t0, t1 = self.times[i - 1], self.times[i]
        f0, f1 = f[i - 1], f[i]
        return t0 + (u - f0) / (f1 - f0) * (t1 - t0)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.times, self.cdf_values)
        return np.where(t < self.times[0], 0.0, out)

    def to_dict(self) -> dict:
        return {"type": "empirical", "times": list(self.times), "cdf": list(self.cdf_values)}


@dataclass(frozen=True)
class Immediate:
    def to_dict(self) -> dict:
        return {"type": "immediate"}


Distribution = Exponential | Empirical | Immediate


def distribution_from_dict(data: Mapping) -> Distribution:
    kind = data.get("type")
    if kind == "exponential":
        return Exponential(float(data["rate"]))
    if kind == "empirical":
        return Empirical(tuple(data["times"]), tuple(data["cdf"]))
    if kind == "immediate":
        return Immediate()
    raise ModelError(f"unknown distribution type {kind!r}")


def _weights(arcs: Mapping[str, int] | Iterable[str] | None) -> dict[str, int]:
    if arcs is None:
        return {}
    if isinstance(arcs, Mapping):
        return {str(p): int(w) for p, w in arcs.items()}
    return {str(p): 1 for p in arcs}


@dataclass(frozen=True)
class Transition:
    id: str
    distribution: Distribution
    inputs: Mapping[str, int] = field(default_factory=dict)
    outputs: Mapping[str, int] = field(default_factory=dict)
    inhibitors: Mapping[str, int] = field(default_factory=dict)
    tests: Mapping[str, int] = field(default_factory=dict)
    resets: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("inputs", "outputs", "inhibitors", "tests"):
            object.__setattr__(self, name, _weights(getattr(self, name)))
        object.__setattr__(self, "resets", tuple(self.resets))
        if not self.inputs:
            raise ModelError(f"transition {self.id} has no input arc")
        for name in ("inputs", "outputs", "inhibitors", "tests"):
            for place, w in getattr(self, name).items():
                if w < 1:
                    raise ModelError(f"arc weight {w} on {self.id}/{place} is below 1")

    def places(self) -> set[str]:
        return set(self.inputs) | set(self.outputs) | set(self.inhibitors) | set(self.tests) | set(self.resets)

    def to_dict(self) -> dict:
        out: dict = {"id": self.id, "distribution": self.distribution.to_dict(), "inputs": dict(self.inputs)}
        for name in ("outputs", "inhibitors", "tests"):
            if getattr(self, name):
                out[name] = dict(getattr(self, name))
        if self.resets:
            out["resets"] = list(self.resets)
        return out


@dataclass(frozen=True)
class StochasticPetriNet:
    """Places with an initial marking, transitions, and a group mapping.

    ``marking_map`` names, for every group member, the place whose marking
    signals that the event has occurred (occurred iff the place holds at
    least one token).
    """

    places: Mapping[str, int]
    transitions: tuple[Transition, ...]
    members: tuple[str, ...] = ()
    marking_map: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "places", {str(p): int(m) for p, m in self.places.items()})
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "marking_map", dict(self.marking_map))
        for p, m in self.places.items():
            if m < 0:
                raise ModelError(f"negative initial marking on place {p}")
        ids = [t.id for t in self.transitions]
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate transition ids")
        for t in self.transitions:
            unknown = t.places() - set(self.places)
            if unknown:
                raise ModelError(f"transition {t.id} references unknown place(s) {sorted(unknown)}")
        missing = [m for m in self.members if m not in self.marking_map]
        if missing:
            raise ModelError(f"marking_map does not cover member(s) {missing}")
        for m, p in self.marking_map.items():
            if p not in self.places:
                raise ModelError(f"marking_map sends {m} to unknown place {p}")

    def transition(self, tid: str) -> Transition:
        for t in self.transitions:
            if t.id == tid:
                return t
        raise ModelError(f"unknown transition {tid}")

    def to_dict(self) -> dict:
        return {
            "places": dict(self.places),
            "transitions": [t.to_dict() for t in self.transitions],
            "members": list(self.members),
            "marking_map": dict(self.marking_map),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> StochasticPetriNet:
        transitions = tuple(
            Transition(
                id=t["id"],
                distribution=distribution_from_dict(t["distribution"]),
                inputs=t.get("inputs", {}),
                outputs=t.get("outputs", {}),
                inhibitors=t.get("inhibitors", {}),
                tests=t.get("tests", {}),
                resets=tuple(t.get("resets", ())),
            )
            for t in data["transitions"]
        )
        return cls(
            places=data["places"],
            transitions=transitions,
            members=tuple(data.get("members", ())),
            marking_map=data.get("marking_map", {}),
        )


def template_places(event: str) -> tuple[str, str]:
    """Names of the (not occurred, occurred) places of a template net."""
    return f"{event}.Ebar", f"{event}.E"


def build_template_net(event: str, failure: Distribution, repair: Distribution | None = None) -> StochasticPetriNet:
    """Two-place net for one event: F moves the token from Ebar to E, R back."""
    up, down = template_places(event)
    transitions = [Transition(f"{event}.F", failure, inputs={up: 1}, outputs={down: 1})]
    if repair is not None:
        transitions.append(Transition(f"{event}.R", repair, inputs={down: 1}, outputs={up: 1}))
    return StochasticPetriNet(
        places={up: 1, down: 0},
        transitions=tuple(transitions),
        members=(event,),
        marking_map={event: down},
    )


@dataclass(frozen=True)
class Coupling:
    """Extra arc between sub-nets: ``enable`` (test arc), ``inhibit`` or ``reset``."""

    kind: str
    place: str
    transition: str
    weight: int = 1

    def __post_init__(self):
        if self.kind not in ("enable", "inhibit", "reset"):
            raise ModelError(f"unknown coupling kind {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "place": self.place, "transition": self.transition}
        if self.weight != 1:
            out["weight"] = self.weight
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> Coupling:
        return cls(data["kind"], data["place"], data["transition"], int(data.get("weight", 1)))


def combine_nets(nets: Sequence[StochasticPetriNet], couplings: Sequence[Coupling] = ()) -> StochasticPetriNet:
    """Disjoint union of nets plus coupling arcs."""
    places: dict[str, int] = {}
    transitions: dict[str, Transition] = {}
    members: list[str] = []
    marking_map: dict[str, str] = {}
    for net in nets:
        clash = set(net.places) & set(places)
        if clash:
            raise ModelError(f"sub-nets share place names {sorted(clash)}")
        places.update(net.places)
        for t in net.transitions:
            if t.id in transitions:
                raise ModelError(f"sub-nets share transition id {t.id}")
            transitions[t.id] = t
        members.extend(net.members)
        marking_map.update(net.marking_map)
    for c in couplings:
        if c.place not in places:
            raise ModelError(f"coupling references unknown place {c.place}")
        if c.transition not in transitions:
            raise ModelError(f"coupling references unknown transition {c.transition}")
        t = transitions[c.transition]
        if c.kind == "enable":
            tests = dict(t.tests)
            tests[c.place] = c.weight
            t = Transition(t.id, t.distribution, t.inputs, t.outputs, t.inhibitors, tests, t.resets)
        elif c.kind == "inhibit":
            inh = dict(t.inhibitors)
            inh[c.place] = c.weight
            t = Transition(t.id, t.distribution, t.inputs, t.outputs, inh, t.tests, t.resets)
        else:
            t = Transition(t.id, t.distribution, t.inputs, t.outputs, t.inhibitors, t.tests, t.resets + (c.place,))
        transitions[c.transition] = t
    return StochasticPetriNet(places, tuple(transitions.values()), tuple(members), marking_map)


# --------------------------------------------------------------------------
# simulation


class _Compiled:
    def __init__(self, net: StochasticPetriNet):
        names = list(net.places)
        pidx = {p: i for i, p in enumerate(names)}
        self.m0 = [net.places[p] for p in names]
        self.need = []  # (place, weight) that must hold >= weight
        self.inhib = []
        self.delta = []  # (place, change) on firing
        self.resets = []
        self.samplers = []
        self.immediate = []
        self.timed = []
        dependents: dict[int, set[int]] = {i: set() for i in range(len(names))}
        touches = []
        for ti, t in enumerate(net.transitions):
            need = {}
            for p, w in t.inputs.items():
                need[pidx[p]] = max(need.get(pidx[p], 0), w)
            for p, w in t.tests.items():
                need[pidx[p]] = max(need.get(pidx[p], 0), w)
            self.need.append(tuple(need.items()))
            self.inhib.append(tuple((pidx[p], w) for p, w in t.inhibitors.items()))
            change: dict[int, int] = {}
            for p, w in t.inputs.items():
                change[pidx[p]] = change.get(pidx[p], 0) - w
            for p, w in t.outputs.items():
                change[pidx[p]] = change.get(pidx[p], 0) + w
            self.delta.append(tuple(change.items()))
            self.resets.append(tuple(pidx[p] for p in t.resets))
            touches.append(set(change) | set(self.resets[-1]))
            for p in list(need) + [q for q, _ in self.inhib[-1]]:
                dependents[p].add(ti)
            if isinstance(t.distribution, Immediate):
                self.immediate.append(ti)
                self.samplers.append(None)
            else:
                self.timed.append(ti)
                self.samplers.append(t.distribution.sample)
        self.is_timed = [s is not None for s in self.samplers]
        # transitions whose enabling may change after firing ti
        self.affected = [
            tuple(sorted({d for p in touches[ti] for d in dependents[p]} | {ti})) for ti in range(len(net.transitions))
        ]
        self.member_places = [pidx[net.marking_map[m]] for m in net.members]
        self.k = len(net.members)
        self.n_states = 2**self.k

    def enabled(self, marking: list[int], ti: int) -> bool:
        for p, w in self.need[ti]:
            if marking[p] < w:
                return False
        for p, w in self.inhib[ti]:
            if marking[p] >= w:
                return False
        return True

    def fire(self, marking: list[int], ti: int) -> None:
        for p, d in self.delta[ti]:
            marking[p] += d
        for p in self.resets[ti]:
            marking[p] = 0

    def state(self, marking: list[int]) -> int:
        s = 0
        for p in self.member_places:
            s = (s << 1) | (marking[p] > 0)
        return s


class _Uniforms:
    __slots__ = ("rng", "buf", "i")

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.buf = rng.random(64).tolist()
        self.i = 0

    def __call__(self) -> float:
        if self.i == len(self.buf):
            self.buf = self.rng.random(256).tolist()
            self.i = 0
        u = self.buf[self.i]
        self.i += 1
        return u


def _replication(c: _Compiled, horizon: float, rng: np.random.Generator, observe: Sequence[float], cap: int):
    uniform = _Uniforms(rng)
    marking = list(c.m0)
    ntr = len(c.samplers)
    clock = [_INF] * ntr
    occupy: dict[int, float] = {}
    entries: dict[int, int] = {}
    flows: dict[tuple[int, int], int] = {}
    seen_states: list[int] = []
    nobs = len(observe)
    obs_i = 0
    now = 0.0

    def settle() -> bool:
        """Fire enabled immediate transitions; True if any fired."""
        fired = 0
        while True:
            for ti in c.immediate:
                if c.enabled(marking, ti):
                    c.fire(marking, ti)
                    fired += 1
                    if fired > cap:
                        raise LivelockError(f"more than {cap} immediate firings at t={now}")
                    break
            else:
                return fired > 0

    settle()
    state = c.state(marking)
    for ti in c.timed:
        if c.enabled(marking, ti):
            clock[ti] = now + c.samplers[ti](uniform())
    timed = c.timed
    while True:
        tnext = _INF
        which = -1
        for ti in timed:
            if clock[ti] < tnext:
                tnext = clock[ti]
                which = ti
        if tnext >= horizon:
            occupy[state] = occupy.get(state, 0.0) + (horizon - now)
            while obs_i < nobs:
                seen_states.append(state)
                obs_i += 1
            break
        occupy[state] = occupy.get(state, 0.0) + (tnext - now)
        while obs_i < nobs and observe[obs_i] < tnext:
            seen_states.append(state)
            obs_i += 1
        now = tnext
        c.fire(marking, which)
        recheck = set(c.affected[which])
        if c.immediate and settle():
            recheck = range(ntr)
        new = c.state(marking)
        if new != state:
            entries[new] = entries.get(new, 0) + 1
            key = (state, new)
            flows[key] = flows.get(key, 0) + 1
            state = new
        for ti in recheck:
            if not c.is_timed[ti]:
                continue
            if c.enabled(marking, ti):
                if ti == which or clock[ti] == _INF:
                    clock[ti] = now + c.samplers[ti](uniform())
            else:
                clock[ti] = _INF
    return occupy, entries, flows, seen_states


@dataclass
class SimulationStats:
    """Aggregated replication statistics per group state.

    ``probs`` are time-average state probabilities over ``[0, mission_time]``,
    ``freqs`` mean state-entry counts per hour, ``flows`` mean transition
    counts per hour between states, and ``point_probs[j]`` the fraction of
    replications in each state at ``observe_times[j]``. Every ``*_se`` array
    holds the Monte Carlo standard error of the corresponding mean.
    """

    members: tuple[str, ...]
    mission_time: float
    replications: int
    seed: int
    probs: np.ndarray
    probs_se: np.ndarray
    freqs: np.ndarray
    freqs_se: np.ndarray
    flows: np.ndarray | None
    observe_times: tuple[float, ...] = ()
    point_probs: np.ndarray | None = None
    point_se: np.ndarray | None = None

    def table(self, at: int | None = None, group: str = "") -> JointTable:
        """Joint table from the time averages, or from observation ``at``."""
        if at is None:
            return JointTable(self.members, self.probs, flows=self.flows, freqs=self.freqs, group=group)
        return JointTable(self.members, self.point_probs[at], group=group)

    def to_dict(self) -> dict:
        out = {
            "members": list(self.members),
            "mission_time": self.mission_time,
            "replications": self.replications,
            "seed": self.seed,
            "probs": self.probs.tolist(),
            "probs_se": self.probs_se.tolist(),
            "freqs": self.freqs.tolist(),
            "freqs_se": self.freqs_se.tolist(),
        }
        if self.observe_times:
            out["observe_times"] = list(self.observe_times)
            out["point_probs"] = self.point_probs.tolist()
            out["point_se"] = self.point_se.tolist()
        return out


def _chunk(net: StochasticPetriNet, horizon: float, seed: int, start: int, stop: int, observe: tuple, cap: int):
    c = _Compiled(net)
    n = c.n_states
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    e1 = np.zeros(n)
    e2 = np.zeros(n)
    flow_sum: dict[tuple[int, int], float] = {}
    point = np.zeros((len(observe), n))
    for rep in range(start, stop):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))
        occupy, entries, flows, seen = _replication(c, horizon, rng, observe, cap)
        for s, v in occupy.items():
            v /= horizon
            s1[s] += v
            s2[s] += v * v
        for s, v in entries.items():
            v /= horizon
            e1[s] += v
            e2[s] += v * v
        for key, v in flows.items():
            flow_sum[key] = flow_sum.get(key, 0.0) + v / horizon
        for j, s in enumerate(seen):
            point[j, s] += 1.0
    return s1, s2, e1, e2, flow_sum, point


def _se(total: np.ndarray, total_sq: np.ndarray, n: int) -> np.ndarray:
    if n < 2:
        return np.full_like(total, np.nan)
    mean = total / n
    var = np.clip(total_sq - n * mean * mean, 0.0, None) / (n - 1)
    return np.sqrt(var / n)


def spn_simulate(
    net: StochasticPetriNet,
    mission_time: float,
    replications: int,
    seed: int,
    observe_times: Sequence[float] = (),
    livelock_cap: int = LIVELOCK_CAP,
    workers: int = 1,
) -> SimulationStats:
    """Monte Carlo statistics of the group state over ``[0, mission_time]``."""
    if replications < 1:
        raise ModelError("replications must be >= 1")
    if not mission_time > 0:
        raise ModelError("mission time must be positive")
    if seed is None:
        raise ModelError("a seed is required for simulation")
    if not net.members:
        raise ModelError("net has no mapped group members")
    observe = tuple(float(t) for t in observe_times)
    if any(b < a for a, b in zip(observe, observe[1:])) or any(t < 0 or t > mission_time for t in observe):
        raise ModelError("observation times must be sorted and inside [0, mission_time]")
    bounds = [(a, min(a + CHUNK, replications)) for a in range(0, replications, CHUNK)]
    args = [(net, float(mission_time), int(seed), a, b, observe, livelock_cap) for a, b in bounds]
    if workers and workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk, *zip(*args)))
    else:
        parts = [_chunk(*a) for a in args]
    k = len(net.members)
    n = 2**k
    s1, s2, e1, e2 = (np.zeros(n) for _ in range(4))
    point = np.zeros((len(observe), n))
    flow_sum: dict[tuple[int, int], float] = {}
    for p in parts:
        s1 += p[0]
        s2 += p[1]
        e1 += p[2]
        e2 += p[3]
        for key in sorted(p[4]):
            flow_sum[key] = flow_sum.get(key, 0.0) + p[4][key]
        point += p[5]
    flows = None
    if k <= 10:
        flows = np.zeros((n, n))
        for (a, b), v in sorted(flow_sum.items()):
            flows[a, b] = v / replications
    r = replications
    point_probs = point / r
    point_se = np.sqrt(np.clip(point_probs * (1 - point_probs), 0, None) / (r - 1)) if r > 1 else np.full_like(point, np.nan)
    return SimulationStats(
        members=net.members,
        mission_time=float(mission_time),
        replications=r,
        seed=int(seed),
        probs=s1 / r,
        probs_se=_se(s1, s2, r),
        freqs=e1 / r,
        freqs_se=_se(e1, e2, r),
        flows=flows,
        observe_times=observe,
        point_probs=point_probs,
        point_se=point_se,
    )
