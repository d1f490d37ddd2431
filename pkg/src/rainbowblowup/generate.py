"""Seeded generators for coloured hosts, blow-up instances, trees and the
application inputs.  Same seed, same output."""
from __future__ import annotations

import math
from typing import Sequence

import networkx as nx
import numpy as np

from .embedder.instance import BlowUpInstance
from .errors import InstanceError
from .graphcore import BipartiteGraph, EdgeSetColouring, PartitionedGraph, edge_key
from .rng import SeedLike, derive


def bounded_colouring(edges: Sequence[tuple[int, int]], k: int, delta_c: int = 1,
                      palette: int | None = None, seed: SeedLike = None) -> EdgeSetColouring:
    """Random (k, delta_c)-bounded colouring.

    With one colour per edge this is a uniform draw from k copies of each
    colour.  Otherwise every edge gets delta_c colours taken among those with
    the most remaining capacity (random ties)."""
    edges = [edge_key(*e) for e in edges]
    if k < 1 or delta_c < 1:
        raise InstanceError("k and delta_c must be positive")
    need = delta_c * len(edges)
    if palette is None:
        palette = max(delta_c, math.ceil(need / k))
    if k * palette < need or palette < delta_c:
        raise InstanceError(f"palette of {palette} colours with k={k} cannot give "
                            f"{delta_c} colours to each of {len(edges)} edges")
    rng = derive(seed, "colouring")
    if delta_c == 1:
        # k slots per colour, shuffled; edge i takes slot i
        slots = rng.permutation(np.repeat(np.arange(palette), k))[:len(edges)]
        return EdgeSetColouring(palette, {e: [int(a)] for e, a in zip(edges, slots.tolist())})
    cap = np.full(palette, k, dtype=np.int64)
    order = rng.permutation(len(edges))
    assign = {}
    for idx in order.tolist():
        keys = cap + rng.random(palette)
        chosen = np.argpartition(-keys, delta_c - 1)[:delta_c]
        if (cap[chosen] <= 0).any():
            raise InstanceError("colouring generator ran out of capacity")
        cap[chosen] -= 1
        assign[edges[idx]] = sorted(int(a) for a in chosen)
    return EdgeSetColouring(palette, assign)


def reduced_graph(kind: str, r: int) -> nx.Graph:
    R = nx.Graph()
    R.add_nodes_from(range(1, r + 1))
    if kind == "path":
        R.add_edges_from((i, i + 1) for i in range(1, r))
    elif kind == "cycle":
        R.add_edges_from((i, i % r + 1) for i in range(1, r + 1) if r > 2 or i == 1)
    elif kind == "complete":
        R.add_edges_from((i, j) for i in range(1, r + 1) for j in range(i + 1, r + 1))
    else:
        raise InstanceError(f"unknown reduced graph {kind!r}")
    return R


def _host_pairs(parts, R: nx.Graph, p: float, rng) -> list[tuple[int, int]]:
    edges = []
    for i, j in sorted(tuple(sorted(e)) for e in R.edges):
        M = rng.random((len(parts[i]), len(parts[j]))) < p
        for a, b in zip(*np.nonzero(M)):
            edges.append(edge_key(parts[i][a], parts[j][b]))
    return edges


def _contiguous(sizes: Sequence[int]) -> list[list[int]]:
    out, s = [], 0
    for z in sizes:
        out.append(list(range(s, s + z)))
        s += z
    return out


def blowup_instance(kind: str = "matchings", r: int = 3, cluster: int | Sequence[int] = 24, p: float = 0.8,
                    k: int = 2, delta_c: int = 1, palette: int | None = None, R: str = "path",
                    delta: int = 2, x0: int = 0, eps: float = 0.15, d: float | None = None,
                    seed: SeedLike = None) -> BlowUpInstance:
    """Planted blow-up instance with complete candidacy graphs.

    ``matchings``: H[X_i, X_j] is a random perfect matching for every ij in R.
    ``general``: H[X_i, X_j] is a union of random partial matchings, with
    every degree at most ``delta``.  ``x0`` exceptional vertices each get one
    private neighbour in some cluster (so X_0 is 2-independent), and their
    images see the whole host cluster of that neighbour.
    """
    rng = derive(seed, "instance", kind)
    sizes = [cluster] * r if isinstance(cluster, int) else list(cluster)
    if len(sizes) != r:
        raise InstanceError("need one cluster size per cluster")
    Rg = reduced_graph(R, r)
    if kind == "general" and max((dg for _, dg in Rg.degree), default=0) > delta:
        raise InstanceError("Delta(R) exceeds delta")
    parts = _contiguous([x0] + sizes)
    Hedges: set[tuple[int, int]] = set()
    deg = np.zeros(sum(sizes) + x0, dtype=np.int64)
    for i, j in sorted(tuple(sorted(e)) for e in Rg.edges):
        if kind == "matchings":
            if sizes[i - 1] != sizes[j - 1]:
                raise InstanceError("matchings form needs equal cluster sizes")
            perm = rng.permutation(sizes[j - 1])
            for a, b in enumerate(perm.tolist()):
                Hedges.add(edge_key(parts[i][a], parts[j][b]))
        elif kind == "general":
            for _ in range(2):
                perm = rng.permutation(len(parts[j]))
                for a in range(len(parts[i])):
                    if a >= len(perm):
                        break
                    x, y = parts[i][a], parts[j][perm[a]]
                    e = edge_key(x, y)
                    if rng.random() < 0.5 and e not in Hedges and deg[x] < delta and deg[y] < delta:
                        Hedges.add(e)
                        deg[x] += 1
                        deg[y] += 1
        else:
            raise InstanceError(f"unknown instance kind {kind!r}")
    Gedges = set(_host_pairs(parts, Rg, p, rng))
    phi0 = {}
    if x0:
        ys = rng.choice(sum(sizes), size=x0, replace=False) + x0
        for x, y in zip(parts[0], sorted(int(v) for v in ys)):
            phi0[x] = x          # X_0 and V_0 share ids
            Hedges.add(edge_key(x, y))
            j = next(i for i in range(1, r + 1) if y in parts[i])
            for v in parts[j]:
                Gedges.add(edge_key(x, v))
    H = PartitionedGraph(parts, Hedges)
    G = PartitionedGraph(parts, Gedges)
    c = bounded_colouring(G.edges, k, delta_c, palette, derive(seed, "colours"))
    A = {i: BipartiteGraph.complete(parts[i], parts[i]) for i in range(1, r + 1)}
    n = G.vertex_count
    dH = max(1, H.max_degree()) if kind == "general" else max(1, max(
        (len(H.neighbours(x) & set(parts[0])) for x in range(n) if x not in phi0), default=1))
    return BlowUpInstance(H, G, Rg, A, c, eps=eps, d=p if d is None else d, mu=k / n,
                          delta=max(dH, delta if kind == "general" else dH),
                          phi0=phi0, form=kind)


def random_bounded_tree(n: int, delta: int, seed: SeedLike = None) -> nx.Graph:
    """Random recursive tree on 0..n-1 with maximum degree at most delta."""
    if delta < 2 and n > 2:
        raise InstanceError("a tree on more than two vertices needs delta >= 2")
    rng = derive(seed, "tree")
    T = nx.Graph()
    T.add_nodes_from(range(n))
    order = rng.permutation(n).tolist()
    open_ = [order[0]]
    for v in order[1:]:
        idx = int(rng.integers(len(open_)))
        u = open_[idx]
        T.add_edge(u, v)
        if T.degree[u] >= delta:
            open_[idx] = open_[-1]
            open_.pop()
        open_.append(v)
    return T


def planted_cycle_host(n: int, r: int, p: float, k: int = 2, delta_c: int = 1, p_other: float = 0.0,
                       p_inside: float = 0.0, seed: SeedLike = None) -> tuple[PartitionedGraph, EdgeSetColouring]:
    """Host on n vertices with r clusters (part 0 empty), consecutive clusters
    around a cycle joined with probability p, other pairs with p_other and
    pairs inside a cluster with p_inside."""
    rng = derive(seed, "planted")
    sizes = [n // r + (1 if i < n % r else 0) for i in range(r)]
    parts = _contiguous([0] + sizes)
    edges = set()
    for i in range(1, r + 1):
        for j in range(i, r + 1):
            consecutive = (j - i) % r in (1, r - 1)
            q = p_inside if i == j else (p if consecutive else p_other)
            if q <= 0:
                continue
            for a, v in enumerate(parts[i]):
                for w in parts[j][(a + 1 if i == j else 0):]:
                    if rng.random() < q:
                        edges.add(edge_key(v, w))
    G = PartitionedGraph(parts, edges)
    return G, bounded_colouring(G.edges, k, delta_c, seed=derive(seed, "planted-colours"))


def random_host(n: int, p: float, k: int = 2, delta_c: int = 1,
                seed: SeedLike = None) -> tuple[PartitionedGraph, EdgeSetColouring]:
    g = nx.gnp_random_graph(n, p, seed=int(derive(seed, "gnp").integers(2**31)))
    G = PartitionedGraph([list(range(n))], g.edges)
    return G, bounded_colouring(G.edges, k, delta_c, seed=derive(seed, "gnp-colours"))


def paths_and_cycles(n: int, seed: SeedLike = None, max_len: int = 12) -> PartitionedGraph:
    """Disjoint union of random paths and cycles covering 0..n-1 (Delta = 2)."""
    rng = derive(seed, "paths")
    order = rng.permutation(n).tolist()
    edges = []
    pos = 0
    while pos < n:
        L = int(rng.integers(2, max_len + 1))
        seg = order[pos:pos + L]
        pos += L
        edges += [edge_key(seg[a], seg[a + 1]) for a in range(len(seg) - 1)]
        if len(seg) >= 3 and rng.random() < 0.5:
            edges.append(edge_key(seg[0], seg[-1]))
    return PartitionedGraph([list(range(n))], edges)
