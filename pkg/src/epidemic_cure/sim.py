"""Event-driven simulation of the controlled SIS contact process.

A healthy node with ``k`` infected neighbours becomes infected at rate
``beta * k``; an infected node ``v`` is cured at the rate ``rho_v`` chosen by
the policy, with ``sum(rho) <= budget``. Policies are consulted at time 0
and right after every event, so curing rates are piecewise constant and
each holding time is an exact exponential draw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Protocol

import numpy as np

from .graph import Bag, Graph

BUDGET_TOL = 1e-9
DEFAULT_MAX_EVENTS = 10**7

INFECTION = "infection"
CURE = "cure"


class InvalidAllocation(ValueError):
    pass


class RngStream:
    """Reproducible uniform stream keyed by ``(seed, stream)``.

    Replication ``i`` of an experiment with base seed ``s`` uses
    ``RngStream(s, i)``; streams with different ids are independent.
    """

    _BLOCK = 1024

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed & (2**64 - 1), spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self._buf: list[float] = []
        self._pos = 0

    def uniform(self) -> float:
        """Uniform draw on [0, 1)."""
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(self._BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def exponential(self, rate: float) -> float:
        return -math.log1p(-self.uniform()) / rate


@dataclass(frozen=True)
class Event:
    kind: str
    node: int
    at: float
    phase: str = ""

    def __str__(self) -> str:
        return f"{self.at!r}\t{self.kind}\t{self.node}\t{self.phase}"


@dataclass(frozen=True)
class Outcome:
    extinct: bool
    at: float
    reason: str = ""

    @property
    def label(self) -> str:
        return "extinct" if self.extinct else "censored"


@dataclass(frozen=True)
class PhaseMark:
    at: float
    tag: str
    attempt: int


@dataclass
class SimState:
    time: float
    infected: Bag
    event_count: int = 0


@dataclass
class Trace:
    initial: Bag
    events: list[Event] = field(default_factory=list)
    outcome: Outcome | None = None
    phases: list[PhaseMark] = field(default_factory=list)
    n_events: int = 0

    def replay(self, g: Graph) -> Iterator[Bag]:
        """Yield the infected set after each event, checking every transition."""
        infected = set(self.initial)
        last = 0.0
        for ev in self.events:
            if ev.at < last:
                raise AssertionError(f"time went backwards at {ev}")
            last = ev.at
            if ev.kind == INFECTION:
                if ev.node in infected:
                    raise AssertionError(f"infection of an infected node: {ev}")
                if not any(w in infected for w in g.adjacency[ev.node]):
                    raise AssertionError(f"infection without infected neighbour: {ev}")
                infected.add(ev.node)
            elif ev.kind == CURE:
                if ev.node not in infected:
                    raise AssertionError(f"cure of a healthy node: {ev}")
                infected.discard(ev.node)
            else:
                raise AssertionError(f"unknown event kind {ev.kind!r}")
            yield Bag(infected)

    def final(self, g: Graph) -> Bag:
        bag = Bag(self.initial)
        for bag in self.replay(g):
            pass
        return bag

    def counts(self) -> tuple[int, int]:
        inf = sum(1 for e in self.events if e.kind == INFECTION)
        return inf, len(self.events) - inf

    def to_log(self) -> str:
        lines = [f"# initial\t{' '.join(map(str, sorted(self.initial)))}"]
        lines.extend(str(e) for e in self.events)
        if self.outcome is not None:
            o = self.outcome
            lines.append(f"# {o.label}\t{o.at!r}\t{o.reason}")
        return "\n".join(lines) + "\n"


class Policy(Protocol):
    """What ``run`` needs from a curing policy."""

    def start(self, g: Graph, infected: Bag, budget: float) -> None: ...

    def allocate(self, infected: Bag) -> Mapping[int, float]: ...

    def on_event(self, event: Event, infected_after: Bag) -> None: ...

    def pop_phase_tags(self) -> list[tuple[str, int]]: ...

    @property
    def phase(self) -> str: ...


def check_allocation(alloc: Mapping[int, float], infected: Iterable[int], budget: float) -> None:
    total = 0.0
    for v, rate in alloc.items():
        if rate < 0 or math.isnan(rate):
            raise InvalidAllocation(f"negative or NaN rate {rate} on node {v}")
        if rate > 0 and v not in infected:
            raise InvalidAllocation(f"positive rate on healthy node {v}")
        total += rate
    if total > budget + BUDGET_TOL:
        raise InvalidAllocation(f"allocation total {total} exceeds budget {budget}")


def _select(u: float, n: int, infected, pressure, beta: float, cut_value: int,
            cures: list[tuple[int, float]]) -> tuple[str, int]:
    """Pick the event for a uniform ``u`` over the cumulative rate vector.

    Entries are ordered: infections of healthy nodes by index, then cures by
    index.
    """
    infect_rate = beta * cut_value
    x = u * (infect_rate + sum(rate for _, rate in cures))
    last = None
    if x < infect_rate:
        for v in range(n):
            k = pressure[v]
            if k and v not in infected:
                last = (INFECTION, v)
                x -= beta * k
                if x < 0:
                    return last
        if last is not None:
            return last
    x -= infect_rate
    for v, rate in cures:
        last = (CURE, v)
        x -= rate
        if x < 0:
            return last
    assert last is not None
    return last


def step(g: Graph, state: SimState, alloc: Mapping[int, float], budget: float,
         rng: RngStream, beta: float = 1.0) -> tuple[Event, SimState] | None:
    """Advance one transition from ``state``.

    Returns ``None`` when no transition can ever happen (zero total rate).
    """
    infected = state.infected
    if not infected:
        raise ValueError("no infected nodes: the process is absorbed")
    check_allocation(alloc, infected, budget)
    pressure = [0] * g.n
    for v in infected:
        for w in g.adjacency[v]:
            pressure[w] += 1
    c = sum(pressure[v] for v in range(g.n) if v not in infected)
    cures = sorted((v, r) for v, r in alloc.items() if r > 0)
    total = beta * c + sum(r for _, r in cures)
    if total <= 0:
        return None
    t = state.time + rng.exponential(total)
    kind, node = _select(rng.uniform(), g.n, infected, pressure, beta, c, cures)
    new = set(infected)
    if kind == INFECTION:
        new.add(node)
    else:
        new.discard(node)
    ev = Event(kind, node, t)
    return ev, SimState(t, Bag(new), state.event_count + 1)


def run(g: Graph, policy: Policy, initial: Iterable[int], budget: float, rng: RngStream,
        *, max_time: float = math.inf, max_events: int = DEFAULT_MAX_EVENTS,
        beta: float = 1.0, record_events: bool = True) -> Trace:
    """Simulate until extinction or until a cap is hit.

    Hitting a cap, or reaching a state where nothing can happen, gives a
    censored outcome rather than an exception.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    infected = set(g.bag(initial))
    trace = Trace(Bag(infected))
    if not infected:
        trace.outcome = Outcome(True, 0.0)
        return trace

    pressure = [0] * g.n
    for v in infected:
        for w in g.adjacency[v]:
            pressure[w] += 1
    cut_value = sum(pressure[v] for v in range(g.n) if v not in infected)
    adjacency = g.adjacency
    n = g.n

    t = 0.0
    current = Bag(infected)
    policy.start(g, current, budget)
    for tag, attempt in policy.pop_phase_tags():
        trace.phases.append(PhaseMark(t, tag, attempt))
    count = 0
    while True:
        alloc = policy.allocate(current)
        check_allocation(alloc, infected, budget)
        cures = sorted((v, r) for v, r in alloc.items() if r > 0)
        total = beta * cut_value + sum(r for _, r in cures)
        if total <= 0:
            trace.outcome = Outcome(False, t, "stalled")
            break
        if count >= max_events:
            trace.outcome = Outcome(False, t, "max_events")
            break
        dt = rng.exponential(total)
        if t + dt > max_time:
            trace.outcome = Outcome(False, max_time, "max_time")
            break
        t += dt
        kind, node = _select(rng.uniform(), n, infected, pressure, beta, cut_value, cures)
        deg = len(adjacency[node])
        if kind == INFECTION:
            cut_value += deg - 2 * pressure[node]
            infected.add(node)
            delta = 1
        else:
            cut_value -= deg - 2 * pressure[node]
            infected.discard(node)
            delta = -1
        for w in adjacency[node]:
            pressure[w] += delta
        count += 1
        trace.n_events = count
        ev = Event(kind, node, t, policy.phase)
        if record_events:
            trace.events.append(ev)
        current = Bag(infected)
        policy.on_event(ev, current)
        for tag, attempt in policy.pop_phase_tags():
            trace.phases.append(PhaseMark(t, tag, attempt))
        if not infected:
            trace.outcome = Outcome(True, t)
            break
    return trace
