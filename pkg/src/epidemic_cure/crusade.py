"""Monotone crusades, their width, and exact impedance / CutWidth.

A crusade is stored as its start bag plus the order in which nodes are
removed; the bag sequence is implied. Impedance is computed top-down over
bitmask-keyed bags with the recursion

    delta(A) = max(cut(A), min_v delta(A - v)),   delta(empty) = 0,

breaking ties in the inner minimum towards the smallest node index.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .graph import EXACT_MAX_NODES, Bag, Graph, cut, cut_mask

BRUTE_FORCE_MAX = 9


class InvalidCrusade(ValueError):
    pass


class GraphTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Crusade:
    """A monotone crusade from ``start`` down to ``start - removal_order``.

    Full crusades remove every node of ``start``; shorter orders describe
    partial crusades ending at a nonempty bag.
    """

    start: Bag
    removal_order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "start", Bag(self.start))
        object.__setattr__(self, "removal_order", tuple(self.removal_order))
        seen = set()
        for v in self.removal_order:
            if v not in self.start:
                raise InvalidCrusade(f"node {v} is not in the start bag")
            if v in seen:
                raise InvalidCrusade(f"node {v} removed twice")
            seen.add(v)

    def __len__(self) -> int:
        return len(self.removal_order) + 1

    @property
    def is_full(self) -> bool:
        return len(self.removal_order) == len(self.start)

    @property
    def end(self) -> Bag:
        return Bag(self.start.difference(self.removal_order))

    def bag_at(self, position: int) -> Bag:
        """Bag after the first ``position`` removals."""
        return Bag(self.start.difference(self.removal_order[:position]))

    def bags(self) -> Iterator[Bag]:
        current = set(self.start)
        yield Bag(current)
        for v in self.removal_order:
            current.discard(v)
            yield Bag(current)


def width(g: Graph, cr: Crusade) -> int:
    """Largest cut over all bags of the crusade, start bag included."""
    for v in cr.start:
        if not 0 <= v < g.n:
            raise InvalidCrusade(f"node {v} is not a node of the graph")
    return max(cut(g, b) for b in cr.bags())


def cut_profile(g: Graph, cr: Crusade) -> list[int]:
    return [cut(g, b) for b in cr.bags()]


class ImpedanceTable:
    """Memoized impedance values and argmin witnesses for one graph.

    Only bags reachable from the queried ones are filled. Once filled the
    table is read-only in practice and can be shared between simulations.
    """

    def __init__(self, g: Graph):
        if g.n > EXACT_MAX_NODES:
            raise GraphTooLarge(
                f"exact impedance needs n <= {EXACT_MAX_NODES}, graph has {g.n} nodes")
        self.graph = g
        self.value: dict[int, int] = {0: 0}
        self.witness: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.value)

    def _fill(self, mask: int) -> int:
        value = self.value
        got = value.get(mask)
        if got is not None:
            return got
        best = math.inf
        arg = -1
        rest = mask
        while rest:
            low = rest & -rest
            d = self._fill(mask ^ low)
            if d < best:
                best = d
                arg = low.bit_length() - 1
            rest ^= low
        val = max(cut_mask(self.graph, mask), best)
        value[mask] = val
        self.witness[mask] = arg
        return val

    def impedance(self, bag: Iterable[int]) -> int:
        return self._fill(_mask_of(self.graph, bag))

    def next_removal(self, bag: Iterable[int]) -> int:
        mask = _mask_of(self.graph, bag)
        if mask == 0:
            raise ValueError("the empty bag has no removal")
        self._fill(mask)
        return self.witness[mask]


def _mask_of(g: Graph, bag: Iterable[int]) -> int:
    if isinstance(bag, int):
        mask = bag
    else:
        mask = 0
        for v in bag:
            mask |= 1 << v
    if mask >> g.n:
        raise ValueError("bag contains nodes outside the graph")
    return mask


def impedance(g: Graph, bag: Iterable[int], table: ImpedanceTable | None = None) -> int:
    """Minimum width over all crusades from ``bag`` to the empty bag."""
    if table is None:
        table = ImpedanceTable(g)
    elif table.graph is not g:
        raise ValueError("impedance table belongs to a different graph")
    return table.impedance(bag)


def cutwidth(g: Graph, table: ImpedanceTable | None = None) -> int:
    return impedance(g, range(g.n), table)


def optimal_crusade(g: Graph, bag: Iterable[int], table: ImpedanceTable | None = None) -> Crusade:
    """Follow argmin witnesses from ``bag`` down to the empty bag."""
    if table is None:
        table = ImpedanceTable(g)
    start = Bag(bag)
    mask = _mask_of(g, start)
    table._fill(mask)
    order = []
    while mask:
        v = table.witness[mask]
        order.append(v)
        mask ^= 1 << v
    return Crusade(start, tuple(order))


def restrict_crusade(order_v: Sequence[int], bag: Iterable[int]) -> Crusade:
    """Remove the nodes of ``bag`` in the relative order given by ``order_v``.

    ``order_v`` must be a permutation of all nodes. If it has width ``W``,
    every bag along the result has cut at most ``cut(bag) + W``.
    """
    order_v = tuple(order_v)
    if sorted(order_v) != list(range(len(order_v))):
        raise InvalidCrusade("order is not a permutation of the node set")
    start = Bag(bag)
    extra = [v for v in start if not 0 <= v < len(order_v)]
    if extra:
        raise InvalidCrusade(f"nodes {sorted(extra)} are not in the ordering")
    return Crusade(start, tuple(v for v in order_v if v in start))


def brute_force_impedance(g: Graph, bag: Iterable[int]) -> int:
    """Impedance by enumerating every removal order of ``bag``."""
    nodes = sorted(set(bag))
    if len(nodes) > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX} nodes, got {len(nodes)}")
    best = math.inf
    for perm in itertools.permutations(nodes):
        current = set(nodes)
        w = cut(g, current)
        for v in perm:
            if w >= best:
                break
            current.discard(v)
            w = max(w, cut(g, current))
        best = min(best, w)
    return int(best)


class ExactCrusades:
    """Target paths from the exact impedance table (optimal crusades)."""

    mode = "exact"

    def __init__(self, g: Graph, table: ImpedanceTable | None = None):
        self.graph = g
        self.table = table if table is not None else ImpedanceTable(g)

    def __call__(self, bag: Bag) -> Crusade:
        return optimal_crusade(self.graph, bag, self.table)

    def width_bound(self) -> int:
        return cutwidth(self.graph, self.table)


class RestrictedCrusades:
    """Target paths obtained by restricting a fixed ordering of all nodes."""

    mode = "restricted"

    def __init__(self, g: Graph, order_v: Sequence[int] | None = None):
        if order_v is None:
            order_v = g.layout
        if order_v is None:
            raise ValueError(f"graph {g.name or '<file>'} has no built-in ordering; pass one")
        self.graph = g
        self.order = tuple(order_v)
        if sorted(self.order) != list(range(g.n)):
            raise InvalidCrusade("order is not a permutation of the node set")
        self._width = width(g, Crusade(g.nodes, self.order))

    def __call__(self, bag: Bag) -> Crusade:
        return restrict_crusade(self.order, bag)

    def width_bound(self) -> int:
        return self._width


def format_order(order: Iterable[int]) -> str:
    return " ".join(str(v) for v in order)


def parse_order(text: str) -> list[int]:
    return [int(tok) for tok in text.split()]
