"""Colour preparation before the round loop: merging rare colours, lifting
the colouring through the exceptional pre-embedding, and reserving disjoint
colour classes for the rounds.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping

import networkx as nx
import numpy as np

from ..coloursplit import SeparationResult, separate_colours
from ..errors import InvariantBreach
from ..graphcore import BipartiteGraph, EdgeSetColouring, PartitionedGraph, edge_key
from ..partition import RoundColouring
from ..rng import SeedLike, derive
from .instance import BlowUpInstance, check_feasible, exc3_loads


def _blocking_pairs(I: BlowUpInstance, phi0: Mapping[int, int], c: EdgeSetColouring) -> dict[int, set[int]]:
    """alpha -> colours beta that alpha blocks: both appear on edges phi0(x)v,
    phi0(x')v at a candidate v of a vertex with X_0-neighbours x, x'."""
    X0 = set(I.H.parts[0])
    block: dict[int, set[int]] = defaultdict(set)
    if len(X0) < 2:
        return block
    for y in range(I.H.vertex_count):
        j = int(I.H.part_of[y])
        if j == 0:
            continue
        ex = sorted(I.H.neighbours(y) & X0)
        if len(ex) < 2:
            continue
        for v in I.A[j].neighbours_of_left(y):
            for a, b in combinations(ex, 2):
                ca = c.get(phi0[a], v, frozenset())
                cb = c.get(phi0[b], v, frozenset())
                for al in ca:
                    for be in cb:
                        if al != be:
                            block[al].add(be)
                            block[be].add(al)
    return block


def merge_rare_colours(I: BlowUpInstance, phi0: Mapping[int, int] | None = None,
                       mu: float | None = None) -> tuple[EdgeSetColouring, dict[int, int]]:
    """Greedily merge pairs of non-critical, non-blocking colour groups whose
    combined edge count stays within mu*n, until no such pair is left.

    Returns the new colouring and the translation old colour -> new colour.
    A merged group keeps the smallest id among its members.
    """
    phi0 = dict(I.phi0 if phi0 is None else phi0)
    mu = I.mu if mu is None else mu
    c = I.c
    bound = mu * I.n
    load = exc3_loads(I, phi0, c)
    critical = {a for a, v in load.items() if v >= bound / 2}
    block = _blocking_pairs(I, phi0, c)
    edges_of: dict[int, set] = defaultdict(set)
    for e, cs in c.assignment.items():
        for a in cs:
            edges_of[a].add(e)
    limit = int(np.floor(bound + 1e-9))
    # groups keyed by representative
    members = {a: {a} for a in edges_of if a not in critical and len(edges_of[a]) < limit}
    gedges = {a: set(edges_of[a]) for a in members}
    gblock = {a: set(block.get(a, ())) for a in members}
    buckets: dict[int, set[int]] = defaultdict(set)
    for a in members:
        buckets[len(gedges[a])].add(a)

    def pop_smallest():
        for size in sorted(buckets):
            if buckets[size]:
                a = min(buckets[size])
                buckets[size].discard(a)
                return a
        return None

    while True:
        g = pop_smallest()
        if g is None:
            break
        partner = None
        for size in sorted(buckets):
            for h in sorted(buckets[size]):
                if members[h] & gblock[g]:
                    continue
                if len(gedges[g] | gedges[h]) <= limit:
                    partner = h
                    break
            if partner is not None:
                break
        if partner is None:
            continue  # g is final
        h = partner
        buckets[len(gedges[h])].discard(h)
        rep, other = min(g, h), max(g, h)
        members[rep] = members[g] | members[h]
        gedges[rep] = gedges[g] | gedges[h]
        gblock[rep] = gblock[g] | gblock[h]
        del members[other], gedges[other], gblock[other]
        buckets[len(gedges[rep])].add(rep)

    translation = {a: a for a in range(c.universe)}
    for rep, mem in members.items():
        for a in mem:
            translation[a] = rep
    new = c.relabelled(translation)
    st = new.stats()
    if st.k > max(limit, c.stats().k):
        raise InvariantBreach(f"merged colouring is {st.k}-bounded, above {limit}")
    before = check_feasible(I, phi0, bound, c)
    if before["feasible"] and not check_feasible(I, phi0, bound, new)["feasible"]:
        raise InvariantBreach("merging broke feasibility of the exceptional bijection")
    return new, translation


def merge_summary(I: BlowUpInstance, old: EdgeSetColouring, new: EdgeSetColouring) -> dict:
    used_before, used_after = len(old.used_colours()), len(new.used_colours())
    return {"colours_before": used_before, "colours_after": used_after,
            "bound": 7 / I.mu * I.delta ** 2 * I.n, "k_after": new.stats().k}


@dataclass
class LiftedColouring:
    graph: PartitionedGraph              # parts: [], V_1..V_r, X_1..X_r (new ids)
    colouring: EdgeSetColouring
    v_new: dict[int, int]                # host vertex -> new id
    x_new: dict[int, int]                # target vertex -> new id
    r: int
    report: dict = field(default_factory=dict)

    def v_old(self) -> dict[int, int]:
        return {b: a for a, b in self.v_new.items()}

    def x_old(self) -> dict[int, int]:
        return {b: a for a, b in self.x_new.items()}


def lift_exceptional_colouring(I: BlowUpInstance, phi0: Mapping[int, int] | None = None,
                               c: EdgeSetColouring | None = None) -> LiftedColouring:
    """Disjoint union of the host pairs of R and the candidacy graphs, coloured
    by c on host edges and by c_exc(xv) = union of c(phi0(x')v) over the
    X_0-neighbours x' of x on candidacy edges (possibly empty)."""
    phi0 = dict(I.phi0 if phi0 is None else phi0)
    c = c or I.c
    r = I.r
    v_new, x_new = {}, {}
    parts = [[]]
    nid = 0
    for i in range(1, r + 1):
        p = []
        for v in I.G.parts[i]:
            v_new[v] = nid
            p.append(nid)
            nid += 1
        parts.append(p)
    for i in range(1, r + 1):
        p = []
        for x in I.H.parts[i]:
            x_new[x] = nid
            p.append(nid)
            nid += 1
        parts.append(p)
    X0 = set(I.H.parts[0])
    edges, assign = [], {}
    for i, j in I.R.edges:
        Vj = set(I.G.parts[j])
        for v in I.G.parts[i]:
            for w in I.G.neighbours(v):
                if w in Vj:
                    e = edge_key(v_new[v], v_new[w])
                    edges.append(e)
                    assign[e] = c(v, w)
    for i in range(1, r + 1):
        A = I.A[i]
        for x, v in A.edges():
            cs: set[int] = set()
            for x0 in I.H.neighbours(x) & X0:
                cs |= c.get(phi0[x0], v, frozenset())
            e = edge_key(x_new[x], v_new[v])
            edges.append(e)
            assign[e] = cs
    graph = PartitionedGraph(parts, edges)
    cexc = EdgeSetColouring(c.universe, assign, allow_empty=True)
    st = cexc.stats()
    bound = 2 * I.mu * I.n
    report = {"k": st.k, "bound": bound, "bounded": st.k <= bound + 1e-9,
              "delta_c": st.delta_c, "delta_bound": I.delta ** 2, "edges": len(edges)}
    # each lifted set is a union of at most Delta original sets
    if st.delta_c > max(1, c.stats().delta_c) * max(1, I.delta):
        raise InvariantBreach(f"lifted colour sets of size {st.delta_c} are too large")
    if not report["bounded"] and check_feasible(I, phi0, I.mu * I.n, c)["feasible"]:
        raise InvariantBreach("lifted colouring is not 2*mu*n-bounded although EXC3 holds")
    return LiftedColouring(graph, cexc, v_new, x_new, r, report)


@dataclass
class Reservation:
    """Outcome of the colour reservation.

    ``classes[(t1, t2)]`` (t1 < t2) is C_{t1 t2}; in ``ledger`` mode every
    class is the whole palette and colour separation is enforced by pruning
    against the used-colour ledger instead.
    """
    Gstar: PartitionedGraph
    A0: dict[int, BipartiteGraph]
    classes: dict[tuple[int, int], set[int]]
    psi: RoundColouring
    mode: str
    universe: int
    separation: SeparationResult | None = None
    report: dict = field(default_factory=dict)
    _matrix: np.ndarray | None = None

    def cls(self, t1: int, t2: int) -> set[int]:
        if self.mode == "ledger":
            return set(range(self.universe))
        a, b = min(t1, t2), max(t1, t2)
        return self.classes.get((a, b), set())

    def round_colours(self, t: int) -> set[int]:
        """C_t: colours of the edges created in round t."""
        if self.mode == "ledger":
            return set(range(self.universe))
        out: set[int] = set()
        for k in range(t):
            out |= self.cls(k, t)
        return out

    def cumulative(self, t: int) -> set[int]:
        """C_t^*: colours allowed after round t."""
        out: set[int] = set()
        for s in range(1, t + 1):
            out |= self.round_colours(s)
        return out

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            n = self.Gstar.vertex_count
            M = np.zeros((n, n), dtype=bool)
            if self.Gstar.edges:
                E = np.array(self.Gstar.edges)
                M[E[:, 0], E[:, 1]] = True
                M[E[:, 1], E[:, 0]] = True
            self._matrix = M
        return self._matrix


def active_labels(I: BlowUpInstance, psi: RoundColouring, lifted: LiftedColouring | None) -> list[tuple[int, int]]:
    """Labels (t1, t2) that some edge actually needs: psi-values of R-edges, and
    (0, psi(j)) when some candidacy edge of cluster j has a lifted colour."""
    labels = {tuple(sorted((psi.psi[i], psi.psi[j]))) for i, j in I.R.edges}
    if lifted is not None:
        part_of = lifted.graph.part_of
        for e, cs in lifted.colouring.assignment.items():
            p = int(max(part_of[e[0]], part_of[e[1]]))
            if cs and p > I.r:
                labels.add((0, psi.psi[p - I.r]))
    return sorted(labels)


def reserve_colours(I: BlowUpInstance, phi0: Mapping[int, int] | None, psi: RoundColouring,
                    mu: float | None = None, eps: float | None = None, d: float | None = None,
                    c: EdgeSetColouring | None = None, mode: str = "split", seed: SeedLike = None,
                    strategy: str = "retry", kappa: float | None = None, max_attempts: int = 50,
                    reg_mode: str = "auto", trials: int = 2000) -> Reservation:
    """Build the sparsified host G*, the round-0 candidacy graphs A_0^j and
    the colour classes C_{t1 t2}.

    ``split`` reserves disjoint classes through separate_colours on the lifted
    graph; ``ledger`` keeps every host edge of an R-pair or at V_0 and leaves
    colour separation to the round loop.
    """
    phi0 = dict(I.phi0 if phi0 is None else phi0)
    mu = I.mu if mu is None else mu
    eps = I.eps if eps is None else eps
    d = I.d if d is None else d
    c = c or I.c
    r = I.r
    V0 = set(I.G.parts[0])
    report: dict = {"mode": mode}
    if mode == "ledger":
        edges = [e for e in I.G.edges
                 if (I.R.has_edge(int(I.G.part_of[e[0]]), int(I.G.part_of[e[1]])))
                 or ((e[0] in V0) != (e[1] in V0))]
        Gstar = I.G.with_edges(edges)
        res = Reservation(Gstar, {j: I.A[j].copy() for j in I.clusters()}, {}, psi, mode, c.universe,
                          report=report)
        _verify_reservation(I, phi0, c, res)
        return res
    if mode != "split":
        raise ValueError(f"unknown reservation mode {mode!r}")
    lifted = lift_exceptional_colouring(I, phi0, c)
    report["lift"] = lifted.report
    labels = active_labels(I, psi, lifted)
    report["labels"] = [list(l) for l in labels]
    index = {l: k for k, l in enumerate(labels)}
    Rexc = nx.Graph()
    Rexc.add_nodes_from(range(1, 2 * r + 1))
    slices = {}
    for i, j in I.R.edges:
        a, b = min(i, j), max(i, j)
        Rexc.add_edge(a, b)
        slices[(a, b)] = [index[tuple(sorted((psi.psi[a], psi.psi[b])))]]
    for j in I.clusters():
        lab = (0, psi.psi[j])
        if lab in index:
            Rexc.add_edge(j, r + j)
            slices[(j, r + j)] = [index[lab]]
    sep = None
    classes: dict[tuple[int, int], set[int]] = {}
    subs: dict[tuple[int, int], BipartiteGraph] = {}
    if labels:
        delta_c = max(1, lifted.report["delta_c"])
        sep = separate_colours(lifted.graph, lifted.graph.parts, Rexc, list(Rexc.edges), lifted.colouring,
                               len(labels), mu, eps, d, delta_c, seed=seed, lower=True,
                               strategy=strategy, kappa=kappa, max_attempts=max_attempts,
                               slices=slices, mode=reg_mode, trials=trials)
        for l, k in index.items():
            classes[l] = set(sep.classes[k]) if len(labels) > 1 else set(range(c.universe))
        for (a, b), ks in slices.items():
            key = (ks[0] if len(labels) > 1 else 0, a, b)
            subs[(a, b)] = sep.subgraphs[key]
        report["separation"] = {"attempts": sep.attempts, "failures": dict(sep.failures),
                                "verdicts": {f"{k[0]}:{k[1]}-{k[2]}": v for k, v in sep.verdicts.items()}}
    v_old, x_old = lifted.v_old(), lifted.x_old()
    edges = []
    for i, j in I.R.edges:
        a, b = min(i, j), max(i, j)
        B = subs[(a, b)]
        for p, q in B.edges():
            edges.append(edge_key(v_old[p], v_old[q]))
    A0 = {}
    for j in I.clusters():
        if (j, r + j) in subs:
            B = subs[(j, r + j)]     # (V_j, X_j) in new ids
            adj = B.adj.T
            left = [x_old[q] for q in B.right]
            right = [v_old[p] for p in B.left]
            A0[j] = _reorder(BipartiteGraph(left, right, adj), I.A[j])
            C0 = classes[(0, psi.psi[j])]
            for v0 in V0:
                for w in I.G.neighbours(v0):
                    if int(I.G.part_of[w]) == j and c(v0, w) <= C0:
                        edges.append(edge_key(v0, w))
        else:
            A0[j] = I.A[j].copy()
    Gstar = I.G.with_edges(set(edges))
    report["gstar_edges"] = Gstar.edge_count
    res = Reservation(Gstar, A0, classes, psi, mode, c.universe, sep, report)
    _verify_reservation(I, phi0, c, res)
    return res


def _reorder(B: BipartiteGraph, like: BipartiteGraph) -> BipartiteGraph:
    li = [B.lindex(a) for a in like.left]
    ri = [B.rindex(b) for b in like.right]
    return BipartiteGraph(like.left, like.right, B.adj[np.ix_(li, ri)])


def _verify_reservation(I: BlowUpInstance, phi0, c: EdgeSetColouring, res: Reservation) -> None:
    psi = res.psi.psi
    for v, w in res.Gstar.edges:
        i, j = int(res.Gstar.part_of[v]), int(res.Gstar.part_of[w])
        if not c(v, w) <= res.cls(psi[i], psi[j]):
            raise InvariantBreach(f"G* edge {(v, w)} carries colours outside its class")
    X0 = set(I.H.parts[0])
    for x0 in X0:
        Nv = res.Gstar.neighbours(phi0[x0])
        for y in I.H.neighbours(x0):
            j = int(I.H.part_of[y])
            if j and not set(res.A0[j].neighbours_of_left(y)) <= Nv:
                raise InvariantBreach(f"candidates of {y} are not all G*-adjacent to phi0({x0})")
    for j, A in res.A0.items():
        if (A.adj & ~I.A[j].adj).any():
            raise InvariantBreach(f"A_0^{j} is not a subgraph of A^{j}")
    res.report["verified"] = True
