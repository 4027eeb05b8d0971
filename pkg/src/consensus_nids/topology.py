"""Undirected NIDS network graphs: generators, Laplacian, BFS distances.

Node indices are 0-based. Torus node ``(r, c)`` has id ``r * side + c``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "InvalidTopologyError",
    "Topology",
    "make_ring",
    "make_torus",
    "make_petersen",
    "make_random",
    "from_edges",
    "load_edge_list",
    "laplacian",
    "shortest_path_lengths",
    "graph_median",
]

KINDS = ("ring", "torus2d", "petersen", "random", "custom")


class InvalidTopologyError(ValueError):
    """Raised for infeasible sizes or malformed graphs."""


@dataclass(frozen=True)
class Topology:
    """An undirected, connected graph of NIDS modules.

    Attributes:
        n: Number of modules.
        adjacency: ``adjacency[i]`` is the sorted tuple of neighbours of ``i``.
        kind: Generator family, one of ``KINDS``.
    """

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    kind: str = "custom"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InvalidTopologyError(f"unknown topology kind {self.kind!r}")
        if self.n < 1 or len(self.adjacency) != self.n:
            raise InvalidTopologyError("adjacency length must equal n >= 1")
        for i, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise InvalidTopologyError(f"neighbours of {i} must be sorted and unique")
            for j in nbrs:
                if not 0 <= j < self.n:
                    raise InvalidTopologyError(f"edge {i}-{j} out of range")
                if j == i:
                    raise InvalidTopologyError(f"self-loop at node {i}")
                if i not in self.adjacency[j]:
                    raise InvalidTopologyError(f"edge {i}-{j} is not symmetric")
        if not self.is_connected():
            raise InvalidTopologyError("topology is not connected")

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    @property
    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as ``(i, j)`` with ``i < j``, lexicographic order."""
        return [(i, j) for i, nbrs in enumerate(self.adjacency) for j in nbrs if i < j]

    @property
    def num_edges(self) -> int:
        return sum(self.degrees) // 2

    def is_connected(self) -> bool:
        return all(d >= 0 for d in _bfs(self.adjacency, 0))

    def to_edge_list(self) -> str:
        return "".join(f"{i} {j}\n" for i, j in self.edges)


def _bfs(adjacency, source: int) -> list[int]:
    dist = [-1] * len(adjacency)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def from_edges(n: int, edges, kind: str = "custom") -> Topology:
    """Build a topology from an iterable of undirected ``(i, j)`` pairs.

    Duplicate edges and self-loops are rejected rather than silently dropped.
    """
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise InvalidTopologyError(f"self-loop at node {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise InvalidTopologyError(f"edge {i}-{j} out of range for n={n}")
        if j in nbrs[i]:
            raise InvalidTopologyError(f"duplicate edge {i}-{j}")
        nbrs[i].add(j)
        nbrs[j].add(i)
    return Topology(n=n, adjacency=tuple(tuple(sorted(s)) for s in nbrs), kind=kind)


def make_ring(n: int) -> Topology:
    if n < 3:
        raise InvalidTopologyError(f"ring needs n >= 3, got {n}")
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)], kind="ring")


def make_torus(side: int) -> Topology:
    """2-D wraparound grid with ``side**2`` nodes, every node of degree 4."""
    if side < 3:
        raise InvalidTopologyError(f"torus needs side >= 3, got {side}")
    edges = []
    for r in range(side):
        for c in range(side):
            u = r * side + c
            edges.append((u, r * side + (c + 1) % side))
            edges.append((u, ((r + 1) % side) * side + c))
    return from_edges(side * side, edges, kind="torus2d")


def make_petersen() -> Topology:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    inner = [(i + 5, (i + 2) % 5 + 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    return from_edges(10, outer + inner + spokes, kind="petersen")


def make_random(n: int, m: int, seed: int | None = None) -> Topology:
    """Uniform ``m``-edge graph on ``n`` nodes, resampled until connected."""
    max_edges = n * (n - 1) // 2
    if n < 1 or m < n - 1 or m > max_edges:
        raise InvalidTopologyError(f"no connected graph with n={n}, m={m}")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rng = np.random.default_rng(seed)
    while True:
        chosen = np.sort(rng.choice(len(pairs), size=m, replace=False))
        edges = [pairs[k] for k in chosen]
        try:
            return from_edges(n, edges, kind="random")
        except InvalidTopologyError:
            continue


def load_edge_list(path: str | Path, n: int | None = None) -> Topology:
    """Read ``i j`` lines; blank lines and ``#`` comments are ignored.

    ``n`` defaults to one more than the largest index seen.
    """
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidTopologyError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise InvalidTopologyError(f"{path}:{lineno}: non-integer node id") from None
    if n is None:
        n = 1 + max((max(e) for e in edges), default=0)
    return from_edges(n, edges)


def laplacian(t: Topology) -> np.ndarray:
    """Integer Laplacian ``D - A``."""
    L = np.zeros((t.n, t.n), dtype=np.int64)
    for i, nbrs in enumerate(t.adjacency):
        L[i, i] = len(nbrs)
        for j in nbrs:
            L[i, j] = -1
    return L


def shortest_path_lengths(t: Topology, source: int) -> list[int]:
    if not 0 <= source < t.n:
        raise IndexError(f"source {source} out of range for n={t.n}")
    return _bfs(t.adjacency, source)


def graph_median(t: Topology) -> int:
    """Node minimising total BFS distance to all others; lowest index on ties."""
    totals = [sum(shortest_path_lengths(t, s)) for s in range(t.n)]
    return totals.index(min(totals))
