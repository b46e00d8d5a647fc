"""The CURE curing policy and simple baseline policies.

CURE runs a sequence of attempts. An attempt starts with a waiting period
(no curing) that lasts until the cut of the infected set drops to
``budget / 8``. The infected set ``B`` at that moment fixes a target path,
a crusade from ``B`` to the empty bag. The policy then spends the whole
budget on the next node of the path. An infection knocks the process off
the path and starts an excursion: with ``C`` the bag the path was about to
reach, the budget goes to the lowest-index node of ``D = I_t - C`` until
``D`` empties (short excursion, resume the path at ``C``) or ``|D|`` reaches
``K`` (long excursion, the attempt fails and a new one starts).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .crusade import Crusade
from .graph import Bag, Graph, cut
from .sim import CURE, INFECTION, Event

log = logging.getLogger(__name__)

WAITING = "waiting"
PATH = "path"
EXCURSION = "excursion"

CrusadeProvider = Callable[[Bag], Crusade]


def excursion_bound(budget: float, max_degree: int) -> int:
    """``K = ceil(budget / (8 * max_degree))``, the long-excursion threshold."""
    if max_degree == 0:
        return 1
    ratio = budget / (8 * max_degree)
    k = math.ceil(ratio - 1e-12)
    return max(k, 1)


@dataclass
class CureConfig:
    graph: Graph
    budget: float
    excursion_bound: int
    cutwidth: int | None = None

    @classmethod
    def for_graph(cls, g: Graph, budget: float, cutwidth: int | None = None,
                  excursion_bound_: int | None = None) -> "CureConfig":
        if budget <= 0:
            raise ValueError("budget must be positive")
        k = excursion_bound_ if excursion_bound_ is not None else excursion_bound(budget, g.max_degree)
        if k < 1:
            raise ValueError("excursion bound must be at least 1")
        cfg = cls(g, float(budget), k, cutwidth)
        if cutwidth is not None and budget < 4 * cutwidth:
            log.warning("budget %s < 4 * cutwidth %s: CURE runs but its bounds do not apply",
                        budget, cutwidth)
        if k <= 2:
            log.warning("excursion bound K=%d <= 2: every excursion is long", k)
        return cfg

    @property
    def waiting_threshold(self) -> float:
        return self.budget / 8


@dataclass
class CureState:
    phase: str = WAITING
    attempt: int = 0
    path: Crusade | None = None
    position: int = 0
    target: set[int] = field(default_factory=set)    # C
    detour: set[int] = field(default_factory=set)    # D = I_t - C
    segments: int = 0
    excursions: int = 0
    long_excursions: int = 0
    attempt_segments: int = 0
    attempt_excursions: int = 0
    rate_checks: int = 0
    rate_violations: int = 0
    max_excursion_cut: int = 0
    tags: list[tuple[str, int]] = field(default_factory=list)

    @property
    def next_node(self) -> int:
        return self.path.removal_order[self.position]


def _begin_attempt(cfg: CureConfig, st: CureState, infected: Bag,
                   provider: CrusadeProvider) -> None:
    st.attempt += 1
    st.attempt_segments = 0
    st.attempt_excursions = 0
    st.phase = WAITING
    st.path = None
    st.target = set()
    st.detour = set()
    st.tags.append((WAITING, st.attempt))
    _maybe_end_wait(cfg, st, infected, provider)


def _maybe_end_wait(cfg: CureConfig, st: CureState, infected: Bag,
                    provider: CrusadeProvider) -> None:
    if not infected or cut(cfg.graph, infected) > cfg.waiting_threshold:
        return
    st.path = provider(infected)
    if st.path.start != infected or not st.path.is_full:
        raise AssertionError("crusade provider returned a path not starting at the infected set")
    st.position = 0
    _enter_path(st)


def _enter_path(st: CureState) -> None:
    st.phase = PATH
    st.segments += 1
    st.attempt_segments += 1
    st.tags.append((PATH, st.attempt))


def cure_policy_new(cfg: CureConfig, initial: Bag, provider: CrusadeProvider) -> CureState:
    """State for the first attempt, already past a zero-length wait if possible."""
    st = CureState()
    _begin_attempt(cfg, st, Bag(initial), provider)
    return st


def allocate(cfg: CureConfig, st: CureState, infected: Bag) -> dict[int, float]:
    if st.phase == WAITING:
        return {}
    if st.phase == PATH:
        v = st.next_node
        if v not in infected:
            raise AssertionError(f"path node {v} is not infected")
        return {v: cfg.budget}
    if not st.detour:
        raise AssertionError("excursion with empty detour set")
    return {min(st.detour): cfg.budget}


def _check_rate(cfg: CureConfig, st: CureState, infected: Bag) -> None:
    c = cut(cfg.graph, infected)
    st.rate_checks += 1
    st.max_excursion_cut = max(st.max_excursion_cut, c)
    if c > cfg.budget / 2:
        st.rate_violations += 1


def on_event(cfg: CureConfig, st: CureState, ev: Event, infected_after: Bag,
             provider: CrusadeProvider, *, check_rates: bool = False) -> CureState:
    """Update the phase machine after ``ev`` has been applied."""
    if st.phase == WAITING:
        if ev.kind != INFECTION:
            raise AssertionError(f"cure during a waiting period: {ev}")
        _maybe_end_wait(cfg, st, infected_after, provider)
        return st

    if st.phase == PATH:
        vk = st.next_node
        if ev.kind == CURE:
            if ev.node != vk:
                raise AssertionError(f"cured {ev.node}, expected path node {vk}")
            st.position += 1
            return st
        # off the path: C is the bag the cure of vk would have produced
        st.target = set(infected_after)
        st.target.discard(ev.node)
        st.target.discard(vk)
        st.detour = {vk, ev.node}
        st.phase = EXCURSION
        st.excursions += 1
        st.attempt_excursions += 1
        st.tags.append((EXCURSION, st.attempt))
    elif ev.kind == CURE:
        if ev.node not in st.detour:
            raise AssertionError(f"cured {ev.node} outside the detour set")
        st.detour.discard(ev.node)
    else:
        if ev.node in st.target:
            raise AssertionError(f"infection of {ev.node} inside the target bag")
        st.detour.add(ev.node)

    if check_rates:
        _check_rate(cfg, st, infected_after)
    if not st.detour:
        st.position += 1
        st.target = set()
        if infected_after:
            _enter_path(st)
        else:
            st.phase = PATH
    elif len(st.detour) >= cfg.excursion_bound:
        st.long_excursions += 1
        _begin_attempt(cfg, st, infected_after, provider)
    return st


class CurePolicy:
    """Adapter exposing the CURE state machine to ``sim.run``.

    With ``check_rates`` the cut of the infected set is compared against
    ``budget / 2`` at every excursion event; violations are counted in
    ``state.rate_violations``. With ``strict`` the excursion bookkeeping is
    re-derived from scratch after every event.
    """

    def __init__(self, cfg: CureConfig, provider: CrusadeProvider, *,
                 check_rates: bool = False, strict: bool = False):
        self.cfg = cfg
        self.provider = provider
        self.check_rates = check_rates
        self.strict = strict
        self.state: CureState | None = None

    def start(self, g: Graph, infected: Bag, budget: float) -> None:
        if g is not self.cfg.graph or budget != self.cfg.budget:
            raise ValueError("policy configured for a different graph or budget")
        self.state = cure_policy_new(self.cfg, infected, self.provider)

    @property
    def phase(self) -> str:
        return self.state.phase

    def allocate(self, infected: Bag) -> Mapping[int, float]:
        return allocate(self.cfg, self.state, infected)

    def on_event(self, event: Event, infected_after: Bag) -> None:
        on_event(self.cfg, self.state, event, infected_after, self.provider,
                 check_rates=self.check_rates)
        if self.strict:
            self._audit(infected_after)

    def pop_phase_tags(self) -> list[tuple[str, int]]:
        tags, self.state.tags = self.state.tags, []
        return tags

    def _audit(self, infected: Bag) -> None:
        st = self.state
        if st.phase == PATH and infected:
            if st.path.bag_at(st.position) != infected:
                raise AssertionError("path-following off the target path")
        elif st.phase == EXCURSION:
            if not st.target <= infected:
                raise AssertionError("target bag not contained in the infected set")
            if set(infected) - st.target != st.detour:
                raise AssertionError("detour set out of sync with I_t - C")
            if Bag(st.target) != st.path.bag_at(st.position + 1):
                raise AssertionError("excursion target is not the next path bag")


def baseline_uniform(g: Graph, infected: Bag, budget: float) -> dict[int, float]:
    if not infected:
        return {}
    share = budget / len(infected)
    return {v: share for v in infected}


def baseline_degree_proportional(g: Graph, infected: Bag, budget: float) -> dict[int, float]:
    total = sum(g.degree(v) for v in infected)
    if total == 0:
        return baseline_uniform(g, infected, budget)
    return {v: budget * g.degree(v) / total for v in infected}


def baseline_none(g: Graph, infected: Bag, budget: float) -> dict[int, float]:
    return {}


class StaticPolicy:
    """A Markov policy ``infected -> allocation`` with no memory."""

    def __init__(self, rule: Callable[[Graph, Bag, float], dict[int, float]], name: str):
        self.rule = rule
        self.name = name
        self._graph = None
        self._budget = 0.0
        self._tags: list[tuple[str, int]] = []

    def start(self, g: Graph, infected: Bag, budget: float) -> None:
        self._graph = g
        self._budget = budget
        self._tags = [(self.name, 1)]

    @property
    def phase(self) -> str:
        return self.name

    def allocate(self, infected: Bag) -> Mapping[int, float]:
        return self.rule(self._graph, infected, self._budget)

    def on_event(self, event: Event, infected_after: Bag) -> None:
        pass

    def pop_phase_tags(self) -> list[tuple[str, int]]:
        tags, self._tags = self._tags, []
        return tags


def uniform_policy() -> StaticPolicy:
    return StaticPolicy(baseline_uniform, "uniform")


def degree_policy() -> StaticPolicy:
    return StaticPolicy(baseline_degree_proportional, "degree")


def no_curing_policy() -> StaticPolicy:
    return StaticPolicy(baseline_none, "none")
