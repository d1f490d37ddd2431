"""Vertex partitions: graph squares, equitable colourings, 2-independent
refinements, the round colouring of R^2 and tree partitions around a cycle.

Reduced graphs are ``networkx.Graph`` objects on the cluster indices 1..r.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import networkx as nx

from .errors import BudgetExhausted, InstanceError
from .graphcore import PartitionedGraph
from .rng import SeedLike, make_rng


def _as_nx(G) -> nx.Graph:
    if isinstance(G, nx.Graph):
        return G
    if isinstance(G, PartitionedGraph):
        return G.to_networkx()
    raise TypeError(f"unsupported graph type {type(G).__name__}")


def square_graph(H: PartitionedGraph) -> PartitionedGraph:
    """H^2: join vertices at distance one or two."""
    edges = set(H.edges)
    for v in range(H.vertex_count):
        for a, b in combinations(sorted(H.neighbours(v)), 2):
            edges.add((a, b))
    return H.with_edges(edges)


def square_nx(g: nx.Graph) -> nx.Graph:
    sq = nx.Graph(g)
    for v in g:
        for a, b in combinations(list(g[v]), 2):
            sq.add_edge(a, b)
    return sq


@dataclass
class EquitablePartition:
    classes: list[list[int]]

    def sizes(self) -> list[int]:
        return [len(c) for c in self.classes]


def _check_equitable(g: nx.Graph, classes: list[list[int]]) -> None:
    seen = [v for c in classes for v in c]
    if sorted(seen) != sorted(g.nodes):
        raise AssertionError("classes do not partition the vertex set")
    for c in classes:
        cs = set(c)
        for v in c:
            if cs & set(g[v]):
                raise AssertionError(f"class containing {v} is not independent")
    sz = [len(c) for c in classes]
    if max(sz) - min(sz) > 1:
        raise AssertionError(f"class sizes {sz} are not balanced")


def equitable_colouring(G, k: int) -> EquitablePartition:
    """Partition into k independent classes whose sizes differ by at most one.

    Needs Delta(G) < k <= n (Hajnal-Szemeredi).  The colouring comes from
    networkx's implementation of the Kierstead-Kostochka procedure and is
    verified before being returned.
    """
    g = _as_nx(G)
    n = g.number_of_nodes()
    delta = max((deg for _, deg in g.degree), default=0)
    if k <= delta:
        raise InstanceError(f"k={k} must exceed the maximum degree {delta}")
    if k > n:
        raise InstanceError(f"k={k} exceeds the number of vertices {n}")
    if g.number_of_edges() == 0:
        nodes = sorted(g.nodes)
        classes = [nodes[i::k] for i in range(k)]
    else:
        col = nx.equitable_color(g, k)
        classes = [[] for _ in range(k)]
        for v, a in col.items():
            classes[a].append(v)
        classes = [sorted(c) for c in classes]
    _check_equitable(g, classes)
    return EquitablePartition(classes)


def two_independent_refine(H: PartitionedGraph, cls: Iterable[int], parts: int,
                           exact: bool = True) -> list[list[int]]:
    """Split ``cls`` into ``parts`` sets, each pairwise at H-distance >= 3.

    Applies the equitable colouring to H^2[cls].  With ``exact`` the class
    size must be divisible by ``parts`` so that all sets have equal size.
    """
    cls = sorted(cls)
    if parts < 1:
        raise InstanceError("parts must be positive")
    if exact and len(cls) % parts:
        raise InstanceError(f"|class|={len(cls)} not divisible by {parts}")
    inside = set(cls)
    g = nx.Graph()
    g.add_nodes_from(cls)
    for v in cls:
        for w in H.neighbours(v):
            if w in inside:
                g.add_edge(v, w)
    # distance two through common neighbours anywhere in H
    for u in range(H.vertex_count):
        nb = [w for w in H.neighbours(u) if w in inside]
        for a, b in combinations(nb, 2):
            g.add_edge(a, b)
    if not cls:
        return [[] for _ in range(parts)]
    if parts > len(cls):
        raise InstanceError("more parts than vertices")
    return equitable_colouring(g, parts).classes


def is_two_independent(H: PartitionedGraph, S: Iterable[int]) -> bool:
    S = list(S)
    for a, b in combinations(S, 2):
        if H.has_edge(a, b) or H.neighbours(a) & H.neighbours(b):
            return False
    return True


@dataclass
class RoundColouring:
    psi: dict[int, int]
    T: int

    def rounds(self) -> list[list[int]]:
        """J_1..J_T as lists of clusters (index t-1 holds J_t)."""
        J = [[] for _ in range(self.T)]
        for i, t in self.psi.items():
            if i != 0:
                J[t - 1].append(i)
        return [sorted(j) for j in J]

    def embedded_after(self, t: int) -> list[int]:
        """J_t^*: clusters whose round is at most t."""
        return sorted(i for i, s in self.psi.items() if i != 0 and s <= t)


def round_colouring(R: nx.Graph, delta_R: int | None = None, force_T: bool = False) -> RoundColouring:
    """Greedy proper colouring psi of R^2 with psi(0) = 0.

    T is the number of colours actually used, or Delta_R^2 + 1 with force_T.
    """
    delta = max((deg for _, deg in R.degree), default=0)
    if delta_R is None:
        delta_R = delta
    if delta > delta_R:
        raise InstanceError(f"Delta(R)={delta} exceeds {delta_R}")
    sq = square_nx(R)
    order = sorted(sq.nodes, key=lambda v: (-sq.degree[v], v))
    psi: dict[int, int] = {0: 0}
    for v in order:
        used = {psi[w] for w in sq[v] if w in psi}
        t = 1
        while t in used:
            t += 1
        psi[v] = t
    used_T = max((t for i, t in psi.items() if i != 0), default=1)
    T = max(used_T, delta_R * delta_R + 1) if force_T else used_T
    return RoundColouring(psi, T)


@dataclass
class TreePartition:
    classes: list[list[int]]  # classes[i] is X_{i+1}
    hat_counts: list[int]     # hat_counts[i]: vertices of X_{i+1} with all neighbours in X_i
    attempts: int = 1
    notes: dict = field(default_factory=dict)


def _tree_adj(T) -> tuple[int, list[list[int]]]:
    if isinstance(T, PartitionedGraph):
        n = T.vertex_count
        adj = [sorted(T.neighbours(v)) for v in range(n)]
        m = T.edge_count
    else:
        g = _as_nx(T)
        n = g.number_of_nodes()
        if sorted(g.nodes) != list(range(n)):
            raise InstanceError("tree vertices must be 0..n-1")
        adj = [sorted(g[v]) for v in range(n)]
        m = g.number_of_edges()
    if n == 0 or m != n - 1:
        raise InstanceError("not a tree: wrong edge count")
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != n:
        raise InstanceError("not a tree: disconnected")
    return n, adj


def hat_counts(adj: Sequence[Sequence[int]], pos: Sequence[int], r: int) -> list[int]:
    counts = [0] * r
    for v, nb in enumerate(adj):
        p = pos[v]
        if nb and all(pos[w] == (p - 1) % r for w in nb):
            counts[p] += 1
    return counts


def tree_cycle_partition(T, r: int, slack: float, seed: SeedLike = None,
                         max_attempts: int = 200) -> TreePartition:
    """Partition a tree into X_1..X_r with every edge between cyclically
    consecutive classes and class sizes within (1 +- slack) n/r.

    Each attempt roots the tree at a random vertex with a random position and
    walks outwards, sending every child to the neighbouring position (+-1) of
    its parent whose class is currently smaller.
    """
    if r < 3 or r % 2 == 0:
        raise InstanceError("r must be odd and at least 3")
    n, adj = _tree_adj(T)
    rng = make_rng(seed)
    lo, hi = (1 - slack) * n / r, (1 + slack) * n / r
    best = None
    for attempt in range(1, max_attempts + 1):
        root = int(rng.integers(n))
        pos = [-1] * n
        size = [0] * r
        pos[root] = int(rng.integers(r))
        size[pos[root]] += 1
        q = deque([root])
        while q:
            v = q.popleft()
            kids = [w for w in adj[v] if pos[w] < 0]
            rng.shuffle(kids)
            for w in kids:
                a, b = (pos[v] + 1) % r, (pos[v] - 1) % r
                if size[a] == size[b]:
                    p = a if rng.random() < 0.5 else b
                else:
                    p = a if size[a] < size[b] else b
                pos[w] = p
                size[p] += 1
                q.append(w)
        for v in range(n):
            for w in adj[v]:
                if (pos[v] - pos[w]) % r not in (1, r - 1):
                    raise AssertionError("tree edge between non-consecutive classes")
        spread = max(abs(s - n / r) for s in size)
        if best is None or spread < best[0]:
            best = (spread, list(size))
        if all(lo - 1e-9 <= s <= hi + 1e-9 for s in size):
            classes = [[] for _ in range(r)]
            for v in range(n):
                classes[pos[v]].append(v)
            return TreePartition(classes, hat_counts(adj, pos, r), attempt)
    raise BudgetExhausted("tree_cycle_partition: no balanced partition within budget",
                          {"best_sizes": best[1] if best else None, "target": n / r, "slack": slack})


def verify_tree_partition(T, classes: Sequence[Sequence[int]]) -> bool:
    """Every tree edge joins cyclically consecutive classes."""
    n, adj = _tree_adj(T)
    r = len(classes)
    pos = [-1] * n
    for i, c in enumerate(classes):
        for v in c:
            pos[v] = i
    if min(pos) < 0:
        return False
    return all((pos[v] - pos[w]) % r in (1, r - 1) for v in range(n) for w in adj[v])
