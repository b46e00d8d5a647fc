"""Undirected graphs, bags of nodes, generators and cut computations."""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

# Bags on graphs up to this size have a bitmask key usable by the exact DP.
EXACT_MAX_NODES = 30


class GraphFormatError(ValueError):
    """Malformed edge-list document."""


class Bag(frozenset):
    """An immutable set of node indices.

    Membership and iteration are those of ``frozenset``. ``mask`` gives the
    packed integer form (bit ``v`` set iff ``v`` is in the bag), which is
    the canonical memo key for graphs with at most ``EXACT_MAX_NODES`` nodes.
    """

    __slots__ = ()

    @classmethod
    def from_mask(cls, mask: int) -> "Bag":
        nodes = []
        v = 0
        while mask:
            if mask & 1:
                nodes.append(v)
            mask >>= 1
            v += 1
        return cls(nodes)

    @property
    def mask(self) -> int:
        m = 0
        for v in self:
            m |= 1 << v
        return m

    def sorted(self) -> list[int]:
        return sorted(self)

    def __repr__(self) -> str:
        return f"Bag({sorted(self)})"


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected graph on nodes ``0..n-1``.

    Parameters
    ----------
    n : int
        Number of nodes.
    edges : tuple of (int, int)
        Sorted unique pairs ``(u, v)`` with ``u < v``.
    name : str
        Free-form label, e.g. ``"line:16"``.
    layout : tuple of int, optional
        A removal order of all nodes with small width, supplied by the
        generators (left to right for a line, row-major for a grid).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    name: str = ""
    layout: tuple[int, ...] | None = None
    adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    neighbor_masks: tuple[int, ...] = field(init=False, repr=False)
    max_degree: int = field(init=False)

    def __post_init__(self):
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        adjacency = tuple(tuple(sorted(a)) for a in adj)
        masks = tuple(sum(1 << w for w in a) for a in adjacency)
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "neighbor_masks", masks)
        object.__setattr__(self, "max_degree", max((len(a) for a in adjacency), default=0))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], name: str = "",
                   layout: Sequence[int] | None = None) -> "Graph":
        if n < 1:
            raise ValueError("graph must have at least one node")
        clean = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            for w in (u, v):
                if not 0 <= w < n:
                    raise ValueError(f"node {w} out of range [0, {n})")
            clean.add((min(u, v), max(u, v)))
        if layout is not None:
            layout = tuple(layout)
            if sorted(layout) != list(range(n)):
                raise ValueError("layout must be a permutation of the nodes")
        return cls(n, tuple(sorted(clean)), name=name, layout=layout)

    @property
    def nodes(self) -> Bag:
        return Bag(range(self.n))

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def is_connected(self) -> bool:
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for w in self.adjacency[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == self.n

    def bag(self, nodes: Iterable[int]) -> Bag:
        b = Bag(nodes)
        for v in b:
            if not 0 <= v < self.n:
                raise ValueError(f"node {v} out of range [0, {self.n})")
        return b

    def to_text(self) -> str:
        lines = [f"{self.n} {len(self.edges)}"]
        lines.extend(f"{u} {v}" for u, v in self.edges)
        return "\n".join(lines) + "\n"


def load_graph(text: str, *, require_connected: bool = False) -> Graph:
    """Parse an edge-list document.

    The first non-comment line is ``"n m"``, followed by ``m`` lines
    ``"u v"``. Lines starting with ``#`` and blank lines are skipped.
    Duplicate edges are merged. A disconnected graph triggers a warning,
    or a ``GraphFormatError`` when ``require_connected`` is set.
    """
    header = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            a, b = (int(x) for x in parts)
        except ValueError:
            raise GraphFormatError(f"line {lineno}: expected two integers, got {raw!r}") from None
        if header is None:
            if a < 1 or b < 0:
                raise GraphFormatError(f"line {lineno}: bad header {raw!r}")
            header = (a, b, lineno)
            continue
        n = header[0]
        if a == b:
            raise GraphFormatError(f"line {lineno}: self-loop at node {a}")
        if not (0 <= a < n and 0 <= b < n):
            raise GraphFormatError(f"line {lineno}: node out of range [0, {n}) in {raw!r}")
        edges.append((a, b))
    if header is None:
        raise GraphFormatError("empty document: missing 'n m' header")
    n, m, hline = header
    if len(edges) != m:
        raise GraphFormatError(f"line {hline}: header declares {m} edges, found {len(edges)}")
    g = Graph.from_edges(n, edges)
    if not g.is_connected():
        if require_connected:
            raise GraphFormatError("graph is not connected")
        warnings.warn("graph is not connected", stacklevel=2)
    return g


def read_graph(path: str, **kwargs) -> Graph:
    with open(path) as fh:
        return load_graph(fh.read(), **kwargs)


def make_line(n: int) -> Graph:
    if n < 1:
        raise ValueError("line needs n >= 1")
    return Graph.from_edges(n, ((i, i + 1) for i in range(n - 1)),
                            name=f"line:{n}", layout=range(n))


def make_grid(rows: int, cols: int) -> Graph:
    if rows < 1 or cols < 1:
        raise ValueError("grid needs rows, cols >= 1")
    edges = []
    for i in range(rows):
        for j in range(cols):
            v = i * cols + j
            if j + 1 < cols:
                edges.append((v, v + 1))
            if i + 1 < rows:
                edges.append((v, v + cols))
    return Graph.from_edges(rows * cols, edges, name=f"grid:{rows}x{cols}",
                            layout=range(rows * cols))


def make_complete(n: int) -> Graph:
    if n < 1:
        raise ValueError("complete graph needs n >= 1")
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
    return Graph.from_edges(n, edges, name=f"complete:{n}", layout=range(n))


def make_cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    edges = [(i, (i + 1) % n) for i in range(n)]
    return Graph.from_edges(n, edges, name=f"cycle:{n}", layout=range(n))


def make_star(n: int) -> Graph:
    if n < 2:
        raise ValueError("star needs n >= 2")
    return Graph.from_edges(n, ((0, i) for i in range(1, n)), name=f"star:{n}",
                            layout=range(n))


def parse_graph_spec(spec: str) -> Graph:
    """Build a graph from ``line:N``, ``grid:RxC``, ``complete:N``,
    ``cycle:N``, ``star:N`` or an edge-list file path."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "line":
            return make_line(int(arg))
        if kind == "grid":
            r, _, c = arg.lower().partition("x")
            return make_grid(int(r), int(c))
        if kind == "complete":
            return make_complete(int(arg))
        if kind == "cycle":
            return make_cycle(int(arg))
        if kind == "star":
            return make_star(int(arg))
    except ValueError as exc:
        raise ValueError(f"bad graph spec {spec!r}: {exc}") from None
    g = read_graph(spec)
    return Graph.from_edges(g.n, g.edges, name=spec)


def cut(g: Graph, bag: Iterable[int]) -> int:
    """Number of edges with exactly one endpoint in ``bag``."""
    if not isinstance(bag, (set, frozenset)):
        bag = set(bag)
    total = 0
    adj = g.adjacency
    for u in bag:
        for w in adj[u]:
            if w not in bag:
                total += 1
    return total


def cut_mask(g: Graph, mask: int) -> int:
    """``cut`` for a bag given in bitmask form."""
    total = 0
    nm = g.neighbor_masks
    rest = mask
    while rest:
        low = rest & -rest
        v = low.bit_length() - 1
        total += (nm[v] & ~mask).bit_count()
        rest ^= low
    return total


def boundary_edges(g: Graph, bag: Iterable[int]) -> list[tuple[int, int]]:
    """Edges ``(u, v)`` with ``u`` in the bag and ``v`` outside, sorted."""
    if not isinstance(bag, (set, frozenset)):
        bag = set(bag)
    return [(u, w) for u in sorted(bag) for w in g.adjacency[u] if w not in bag]
