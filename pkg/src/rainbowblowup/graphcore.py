"""Vertex-partitioned graphs and edge-set colourings.

Vertices and colours are dense non-negative integers.  An ordinary edge
colouring is stored as a colouring by singleton sets, so a single code path
covers both cases.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InstanceError

Edge = tuple[int, int]


def edge_key(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class PartitionedGraph:
    """Simple undirected graph whose vertex set carries an indexed partition.

    Part 0 is the exceptional part and may be empty.  The graph is treated as
    immutable once built.
    """

    def __init__(self, parts: Sequence[Iterable[int]], edges: Iterable[Sequence[int]]):
        self.parts: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(p)) for p in parts)
        n = sum(len(p) for p in self.parts)
        self.vertex_count = n
        part_of = np.full(n, -1, dtype=np.int64)
        for i, p in enumerate(self.parts):
            for v in p:
                if not 0 <= v < n or part_of[v] != -1:
                    raise InstanceError(f"parts do not partition range({n}): vertex {v}")
                part_of[v] = i
        self.part_of = part_of
        adj: list[set[int]] = [set() for _ in range(n)]
        elist = []
        for e in edges:
            u, v = int(e[0]), int(e[1])
            if not (0 <= u < n and 0 <= v < n):
                raise InstanceError(f"edge endpoint out of range: {(u, v)}")
            if u == v:
                raise InstanceError(f"self-loop at {u}")
            if v in adj[u]:
                raise InstanceError(f"duplicate edge {edge_key(u, v)}")
            adj[u].add(v)
            adj[v].add(u)
            elist.append(edge_key(u, v))
        self._adj = adj
        self.edges: tuple[Edge, ...] = tuple(sorted(elist))

    # basic queries
    @property
    def r(self) -> int:
        return len(self.parts) - 1

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj[u]

    def neighbours(self, v: int) -> set[int]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def max_degree(self) -> int:
        return max((len(a) for a in self._adj), default=0)

    def min_degree(self) -> int:
        return min((len(a) for a in self._adj), default=0)

    def degree_into(self, v: int, S: Iterable[int]) -> int:
        a = self._adj[v]
        return sum(1 for w in S if w in a)

    def bipartite_matrix(self, V1: Sequence[int], V2: Sequence[int]) -> np.ndarray:
        """Dense 0/1 adjacency between the ordered vertex lists V1 and V2."""
        M = np.zeros((len(V1), len(V2)), dtype=bool)
        col = {w: j for j, w in enumerate(V2)}
        for i, u in enumerate(V1):
            for w in self._adj[u]:
                j = col.get(w)
                if j is not None:
                    M[i, j] = True
        return M

    def with_edges(self, edges: Iterable[Sequence[int]]) -> "PartitionedGraph":
        """Graph on the same partitioned vertex set with a new edge set."""
        return PartitionedGraph(self.parts, edges)

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.vertex_count))
        g.add_edges_from(self.edges)
        return g

    def __eq__(self, other) -> bool:
        return (isinstance(other, PartitionedGraph) and self.parts == other.parts
                and self.edges == other.edges)

    def __repr__(self) -> str:
        sizes = [len(p) for p in self.parts]
        return f"PartitionedGraph(parts={sizes}, edges={len(self.edges)})"


def build_partitioned_graph(part_sizes: Sequence[int], edges: Iterable[Sequence[int]]) -> PartitionedGraph:
    """Graph with contiguous vertex ids grouped by part, in the given order."""
    parts, start = [], 0
    for s in part_sizes:
        if s < 0:
            raise InstanceError("negative part size")
        parts.append(range(start, start + s))
        start += s
    return PartitionedGraph(parts, edges)


@dataclass
class ColourStats:
    edge_counts: dict[int, int]
    vertex_counts: dict[int, Counter]  # v -> Counter(alpha -> d^alpha(v))
    k: int
    delta_c: int

    def bounded(self, k: int, delta: int | None = None) -> bool:
        return self.k <= k and (delta is None or self.delta_c <= delta)


class EdgeSetColouring:
    """Map from edges to non-empty finite colour sets over range(universe)."""

    def __init__(self, universe: int, assignment: Mapping[Sequence[int], Iterable[int]],
                 allow_empty: bool = False):
        self.universe = int(universe)
        self.allow_empty = allow_empty
        self.assignment: dict[Edge, frozenset[int]] = {}
        for e, cs in assignment.items():
            s = frozenset(int(a) for a in cs)
            if not s and not allow_empty:
                raise InstanceError(f"edge {tuple(e)} has an empty colour set")
            for a in s:
                if not 0 <= a < self.universe:
                    raise InstanceError(f"colour {a} outside universe of size {self.universe}")
            self.assignment[edge_key(int(e[0]), int(e[1]))] = s
        self._by_colour: dict[int, list[Edge]] | None = None

    def __call__(self, u: int, v: int) -> frozenset[int]:
        try:
            return self.assignment[edge_key(u, v)]
        except KeyError:
            raise InstanceError(f"uncoloured edge {edge_key(u, v)}") from None

    def get(self, u: int, v: int, default=None):
        return self.assignment.get(edge_key(u, v), default)

    def edges_with(self, alpha: int) -> list[Edge]:
        if self._by_colour is None:
            by = defaultdict(list)
            for e, cs in self.assignment.items():
                for a in cs:
                    by[a].append(e)
            self._by_colour = dict(by)
        return self._by_colour.get(alpha, [])

    def used_colours(self) -> set[int]:
        out: set[int] = set()
        for cs in self.assignment.values():
            out |= cs
        return out

    def covers(self, G: PartitionedGraph) -> bool:
        return all(e in self.assignment for e in G.edges)

    def relabelled(self, f: Mapping[int, int], universe: int | None = None) -> "EdgeSetColouring":
        return EdgeSetColouring(self.universe if universe is None else universe,
                                {e: {f[a] for a in cs} for e, cs in self.assignment.items()},
                                self.allow_empty)

    def restricted(self, edges: Iterable[Edge]) -> "EdgeSetColouring":
        return EdgeSetColouring(self.universe, {e: self.assignment[edge_key(*e)] for e in edges},
                                self.allow_empty)

    def stats(self) -> ColourStats:
        counts: Counter = Counter()
        per_v: dict[int, Counter] = defaultdict(Counter)
        dc = 0
        for (u, v), cs in self.assignment.items():
            dc = max(dc, len(cs))
            for a in cs:
                counts[a] += 1
                per_v[u][a] += 1
                per_v[v][a] += 1
        return ColourStats(dict(counts), dict(per_v), max(counts.values(), default=0), dc)


def singleton_colouring(universe: int, colours: Mapping[Sequence[int], int]) -> EdgeSetColouring:
    return EdgeSetColouring(universe, {e: (a,) for e, a in colours.items()})


def colour_boundedness(c: EdgeSetColouring) -> tuple[int, int]:
    """(k, Delta_c): largest colour multiplicity and largest colour-set size."""
    st = c.stats()
    return st.k, st.delta_c


def colour_degree(G: PartitionedGraph, c: EdgeSetColouring, v: int, alpha: int) -> int:
    """Number of edges at v whose colour set contains alpha."""
    if not 0 <= v < G.vertex_count:
        raise InstanceError(f"unknown vertex {v}")
    if not 0 <= alpha < c.universe:
        raise InstanceError(f"unknown colour {alpha}")
    return sum(1 for w in G.neighbours(v) if alpha in c(v, w))


def restrict_to_colours(G: PartitionedGraph, c: EdgeSetColouring, allowed: Iterable[int]) -> PartitionedGraph:
    """Spanning subgraph G_{C'} keeping the edges e with c(e) inside C'."""
    allowed = frozenset(allowed)
    bad = [a for a in allowed if not 0 <= a < c.universe]
    if bad:
        raise InstanceError(f"unknown colours {sorted(bad)[:5]}")
    return G.with_edges(e for e in G.edges if c(*e) <= allowed)


def is_rainbow(edges: Iterable[Sequence[int]], c: EdgeSetColouring) -> tuple[bool, tuple[Edge, Edge] | None]:
    """Check pairwise disjointness of colour sets; return a witnessing pair on failure."""
    owner: dict[int, Edge] = {}
    seen: set[Edge] = set()
    for e in edges:
        e = edge_key(int(e[0]), int(e[1]))
        if e in seen:
            continue
        seen.add(e)
        for a in c(*e):
            if a in owner:
                return False, (owner[a], e)
            owner[a] = e
    return True, None


# JSON plumbing

def graph_to_json(G: PartitionedGraph, c: EdgeSetColouring | None = None) -> dict:
    contiguous = all(p == tuple(range(p[0], p[0] + len(p))) for p in G.parts if p)
    starts = [p[0] for p in G.parts if p]
    if not (contiguous and starts == sorted(starts)):
        raise ValueError("JSON format requires contiguous parts")
    out: dict = {"parts": [len(p) for p in G.parts], "edges": [list(e) for e in G.edges]}
    if c is not None:
        out["colours"] = {"universe": c.universe,
                          "assignment": [[u, v, sorted(c.assignment[(u, v)])]
                                         for (u, v) in sorted(c.assignment)]}
    return out


def graph_from_json(obj: Mapping) -> tuple[PartitionedGraph, EdgeSetColouring | None]:
    try:
        G = build_partitioned_graph(obj["parts"], obj["edges"])
        c = None
        if obj.get("colours") is not None:
            col = obj["colours"]
            c = EdgeSetColouring(col["universe"], {(u, v): cs for u, v, cs in col["assignment"]})
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed graph JSON: {exc}") from exc
    if c is not None and not c.covers(G):
        raise InstanceError("colouring does not cover every edge")
    return G, c


class BipartiteGraph:
    """Bipartite graph between two ordered vertex lists, stored as a dense 0/1 matrix.

    Used for cluster pairs, candidacy graphs and matching instances.  Vertex
    ids on the two sides are arbitrary labels; row i is ``left[i]``, column j
    is ``right[j]``.
    """

    __slots__ = ("left", "right", "adj", "_li", "_ri")

    def __init__(self, left: Sequence[int], right: Sequence[int], adj: np.ndarray | None = None):
        self.left = tuple(int(a) for a in left)
        self.right = tuple(int(b) for b in right)
        if adj is None:
            adj = np.zeros((len(self.left), len(self.right)), dtype=bool)
        adj = np.asarray(adj, dtype=bool)
        if adj.shape != (len(self.left), len(self.right)):
            raise InstanceError(f"adjacency shape {adj.shape} does not match sides")
        self.adj = adj
        self._li = {a: i for i, a in enumerate(self.left)}
        self._ri = {b: j for j, b in enumerate(self.right)}
        if len(self._li) != len(self.left) or len(self._ri) != len(self.right):
            raise InstanceError("repeated vertex on one side")

    @classmethod
    def from_edges(cls, left, right, edges) -> "BipartiteGraph":
        B = cls(left, right)
        for a, b in edges:
            try:
                B.adj[B._li[a], B._ri[b]] = True
            except KeyError:
                raise InstanceError(f"edge {(a, b)} not between the two sides") from None
        return B

    @classmethod
    def complete(cls, left, right) -> "BipartiteGraph":
        return cls(left, right, np.ones((len(left), len(right)), dtype=bool))

    @classmethod
    def from_graph(cls, G: PartitionedGraph, V1, V2) -> "BipartiteGraph":
        return cls(V1, V2, G.bipartite_matrix(V1, V2))

    def with_adj(self, adj: np.ndarray) -> "BipartiteGraph":
        return BipartiteGraph(self.left, self.right, adj)

    def copy(self) -> "BipartiteGraph":
        return self.with_adj(self.adj.copy())

    def lindex(self, a: int) -> int:
        return self._li[a]

    def rindex(self, b: int) -> int:
        return self._ri[b]

    def has_edge(self, a: int, b: int) -> bool:
        i, j = self._li.get(a), self._ri.get(b)
        return i is not None and j is not None and bool(self.adj[i, j])

    def neighbours_of_left(self, a: int) -> list[int]:
        return [self.right[j] for j in np.flatnonzero(self.adj[self._li[a]])]

    def neighbours_of_right(self, b: int) -> list[int]:
        return [self.left[i] for i in np.flatnonzero(self.adj[:, self._ri[b]])]

    def edges(self) -> list[Edge]:
        I, J = np.nonzero(self.adj)
        return [(self.left[i], self.right[j]) for i, j in zip(I.tolist(), J.tolist())]

    @property
    def edge_count(self) -> int:
        return int(self.adj.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.adj.shape

    def density(self) -> float:
        s = self.adj.size
        return float(self.adj.sum()) / s if s else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return self.left == other.left and self.right == other.right and bool(np.array_equal(self.adj, other.adj))

    def __repr__(self) -> str:
        return f"BipartiteGraph({len(self.left)}x{len(self.right)}, edges={self.edge_count})"
