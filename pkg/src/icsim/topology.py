"""Communication graphs, the BFS spanning tree used for flag passing, and the
fixed per-iteration round schedule."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

Edge = tuple[int, int]


class TopologyError(ValueError):
    pass


class DisconnectedGraphError(TopologyError):
    def __init__(self, components: list[list[int]]):
        self.components = components
        super().__init__(f"graph is disconnected; components: {components}")


def _components(n: int, adjacency: Sequence[Sequence[int]]) -> list[list[int]]:
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        comp, stack = [], [start]
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in adjacency[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


@dataclass(frozen=True)
class Graph:
    """A simple connected undirected graph on parties ``0..n-1``."""

    n: int
    edges: tuple[Edge, ...]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        if n < 2:
            raise TopologyError(f"need at least 2 parties, got n={n}")
        normalized = set()
        for raw in edges:
            u, v = int(raw[0]), int(raw[1])
            if not (0 <= u < n and 0 <= v < n):
                raise TopologyError(f"edge ({u}, {v}) has a party id outside [0, {n})")
            if u == v:
                raise TopologyError(f"self-loop at party {u}")
            e = (min(u, v), max(u, v))
            if e in normalized:
                raise TopologyError(f"duplicate edge {e}")
            normalized.add(e)
        if not normalized:
            raise TopologyError("graph has no edges")
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in normalized:
            adj[u].append(v)
            adj[v].append(u)
        adjacency = tuple(tuple(sorted(a)) for a in adj)
        comps = _components(n, adjacency)
        if len(comps) > 1:
            raise DisconnectedGraphError(comps)
        return cls(n=n, edges=tuple(sorted(normalized)), adjacency=adjacency)

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return neighbors(self, v)

    def directed_links(self) -> list[Edge]:
        """All ordered (sender, receiver) pairs, sorted."""
        return sorted([(u, v) for u, v in self.edges] + [(v, u) for u, v in self.edges])


def neighbors(g: Graph, v: int) -> tuple[int, ...]:
    if not 0 <= v < g.n:
        raise TopologyError(f"party id {v} outside [0, {g.n})")
    return g.adjacency[v]


@dataclass(frozen=True)
class SpanningTree:
    root: int
    parent: tuple[int | None, ...]
    children: tuple[tuple[int, ...], ...]
    level: tuple[int, ...]
    depth: int

    def edges(self) -> list[Edge]:
        return sorted((min(v, p), max(v, p)) for v, p in enumerate(self.parent) if p is not None)


def build_spanning_tree(g: Graph) -> SpanningTree:
    """BFS tree rooted at the lowest party id, visiting neighbors in ascending order."""
    root = 0
    parent: list[int | None] = [None] * g.n
    level = [0] * g.n
    level[root] = 1
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for w in g.adjacency[v]:
            if level[w] == 0:
                level[w] = level[v] + 1
                parent[w] = v
                queue.append(w)
    if 0 in level:
        raise DisconnectedGraphError(_components(g.n, g.adjacency))
    children: list[list[int]] = [[] for _ in range(g.n)]
    for v, p in enumerate(parent):
        if p is not None:
            children[p].append(v)
    return SpanningTree(
        root=root,
        parent=tuple(parent),
        children=tuple(tuple(sorted(c)) for c in children),
        level=tuple(level),
        depth=max(level),
    )


@dataclass(frozen=True)
class RoundSchedule:
    """Round counts of the four phases of one iteration.

    ``rounds_init`` is the one-off randomness-exchange range that precedes the
    first iteration (zero unless the scheme exchanges seeds over the network).
    """

    rounds_meeting_points: int
    rounds_flag_passing: int
    rounds_simulation: int
    rounds_rewind: int
    rounds_init: int = 0

    @property
    def iteration_length(self) -> int:
        return (
            self.rounds_meeting_points
            + self.rounds_flag_passing
            + self.rounds_simulation
            + self.rounds_rewind
        )

    @property
    def offsets(self) -> dict[str, int]:
        """Phase start offsets relative to the iteration's first round."""
        fp = self.rounds_meeting_points
        sim = fp + self.rounds_flag_passing
        rw = sim + self.rounds_simulation
        return {"meeting_points": 0, "flag_passing": fp, "simulation": sim, "rewind": rw}

    def iteration_start(self, iteration: int) -> int:
        """Global round number of the first round of ``iteration`` (1-based)."""
        return self.rounds_init + (iteration - 1) * self.iteration_length

    def total_rounds(self, iterations: int) -> int:
        return self.rounds_init + iterations * self.iteration_length


def make_round_schedule(g: Graph, tree: SpanningTree, K: int, mp_bits: int, init_rounds: int = 0) -> RoundSchedule:
    return RoundSchedule(
        rounds_meeting_points=mp_bits,
        rounds_flag_passing=2 * tree.depth,
        rounds_simulation=5 * K + 1,
        rounds_rewind=g.n,
        rounds_init=init_rounds,
    )


# --- generators -------------------------------------------------------------

def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(n: int, center: int = 0) -> Graph:
    return Graph.from_edges(n, [(center, v) for v in range(n) if v != center])


def ring_graph(n: int) -> Graph:
    if n < 3:
        raise TopologyError("a ring needs at least 3 parties")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def erdos_renyi_graph(n: int, p: float, seed: int, max_tries: int = 1000) -> Graph:
    """G(n, p), resampled until connected."""
    rng = random.Random(seed)
    for _ in range(max_tries):
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        try:
            return Graph.from_edges(n, edges)
        except (DisconnectedGraphError, TopologyError):
            continue
    raise TopologyError(f"no connected G({n}, {p}) sample after {max_tries} tries")


GENERATORS = {
    "path": path_graph,
    "star": star_graph,
    "ring": ring_graph,
    "complete": complete_graph,
    "erdos-renyi": erdos_renyi_graph,
}


def parse_edge_list(text: str) -> Graph:
    """Parse the edge-list format: a header ``n m`` followed by ``m`` lines ``u v``."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 2:
        raise TopologyError("edge list must start with a line 'n m'")
    n, m = (int(x) for x in lines[0])
    body = lines[1:]
    if len(body) != m:
        raise TopologyError(f"header declares {m} edges but {len(body)} follow")
    edges = []
    for i, parts in enumerate(body, start=2):
        if len(parts) != 2:
            raise TopologyError(f"line {i}: expected 'u v'")
        edges.append((int(parts[0]), int(parts[1])))
    return Graph.from_edges(n, edges)


def format_edge_list(g: Graph) -> str:
    return "\n".join([f"{g.n} {g.m}"] + [f"{u} {v}" for u, v in g.edges]) + "\n"


def load_edge_list(path: str | Path) -> Graph:
    return parse_edge_list(Path(path).read_text())
