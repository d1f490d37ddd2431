"""Applications of the rainbow blow-up machinery that run without a
regularity lemma: bounded-degree spanning trees in clustered hosts whose
clusters form a Hamilton cycle, the partial embedding lemma for a few
exceptional vertices, and spanning graphs of quasi-random hosts.

Hosts are always supplied with their cluster partition (part 0 may hold
leftover vertices); nothing here regularizes a raw graph.
"""
from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import networkx as nx
import numpy as np

from .embedder import (BlowUpInstance, EmbedParams, EmbedResult, complete_candidacy,
                       rainbow_blowup_embed, verify_embedding)
from .errors import BudgetExhausted, InstanceError, InvariantBreach
from .graphcore import (BipartiteGraph, EdgeSetColouring, PartitionedGraph, colour_boundedness,
                        edge_key, is_rainbow)
from .matching import ConflictSystem, covering_conflict_free_matching, hall_violator, maximum_matching
from .coloursplit import random_colour_partition
from .partition import equitable_colouring, square_nx, tree_cycle_partition, verify_tree_partition
from .regularity import test_pair
from .rng import SeedLike, derive, make_rng

HAMILTON_LIMIT = 20


def _as_nx(G) -> nx.Graph:
    if isinstance(G, PartitionedGraph):
        return G.to_networkx()
    return G


def _stage(name: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (InstanceError, BudgetExhausted, InvariantBreach) as exc:
        msg = str(exc)
        if not msg.startswith("["):
            msg = f"[{name}] {msg}"
        if isinstance(exc, BudgetExhausted):
            raise BudgetExhausted(msg, {"stage": name, **exc.diagnostics}) from exc
        raise type(exc)(msg) from exc


# Hamilton cycles in small reduced graphs

def hamilton_cycle(R: nx.Graph) -> list[int] | None:
    """A Hamilton cycle of R as a vertex list, or None.  Held-Karp style DP
    over subsets, so only for small R."""
    nodes = sorted(R.nodes)
    r = len(nodes)
    if r > HAMILTON_LIMIT:
        raise InstanceError(f"Hamilton search limited to {HAMILTON_LIMIT} vertices, got {r}")
    if r < 3:
        return None
    idx = {v: i for i, v in enumerate(nodes)}
    nb = [0] * r
    for u, v in R.edges:
        nb[idx[u]] |= 1 << idx[v]
        nb[idx[v]] |= 1 << idx[u]
    full = (1 << r) - 1
    # reach[S] = bitmask of end vertices e such that a path from 0 through S ends at e
    reach = [0] * (1 << r)
    reach[1] = 1
    for S in range(1, 1 << r):
        if not S & 1 or not reach[S]:
            continue
        ends = reach[S]
        e = 0
        while ends:
            if ends & 1:
                nxt = nb[e] & ~S
                while nxt:
                    low = nxt & -nxt
                    w = low.bit_length() - 1
                    reach[S | low] |= 1 << w
                    nxt ^= low
            ends >>= 1
            e += 1
    closing = reach[full] & nb[0]
    if not closing:
        return None
    # walk back
    e = (closing & -closing).bit_length() - 1
    path, S = [e], full
    while S != 1:
        prev_S = S & ~(1 << e)
        cand = reach[prev_S] & nb[e]
        e = (cand & -cand).bit_length() - 1
        path.append(e)
        S = prev_S
    path.reverse()
    return [nodes[i] for i in path]


def dirac_check(R: nx.Graph) -> dict:
    r = R.number_of_nodes()
    md = min((d for _, d in R.degree), default=0)
    return {"min_degree": md, "r": r, "dirac": r >= 3 and 2 * md >= r}


def reduced_graph_of(G: PartitionedGraph, eps: float, d: float, flavour: str = "lower-regular",
                     mode: str = "auto", trials: int = 2000, seed: SeedLike = None) -> tuple[nx.Graph, dict]:
    """Graph on the clusters 1..r joining pairs that pass the regularity test."""
    R = nx.Graph()
    R.add_nodes_from(range(1, G.r + 1))
    verdicts = {}
    for i, j in combinations(range(1, G.r + 1), 2):
        v = test_pair(G, G.parts[i], G.parts[j], eps=eps, d=d, flavour=flavour, mode=mode,
                      trials=trials, seed=derive(seed, "reduced", i, j))
        verdicts[f"{i}-{j}"] = v.to_json()
        if v.passed:
            R.add_edge(i, j)
    return R, verdicts


# trees in clustered hosts

@dataclass
class TreeEmbedding:
    phi: dict[int, int]
    instance: BlowUpInstance
    report: dict = field(default_factory=dict)


def _tree_graph(T) -> nx.Graph:
    g = _as_nx(T)
    n = g.number_of_nodes()
    if sorted(g.nodes) != list(range(n)):
        raise InstanceError("tree vertices must be 0..n-1")
    if n == 0 or not nx.is_tree(g):
        raise InstanceError("T is not a tree")
    return g


def select_hats(T: nx.Graph, classes: Sequence[Sequence[int]], need: Sequence[int],
                seed: SeedLike = None) -> list[list[int]] | None:
    """For each i pick need[i] vertices of classes[i] whose neighbours all lie
    in classes[i-1] (cyclically), keeping the union of all picks
    2-independent.  Greedy in random order; None when a class runs short."""
    rng = make_rng(seed)
    r = len(classes)
    pos = {v: i for i, c in enumerate(classes) for v in c}
    blocked: set[int] = set()
    hats = []
    for i in range(r):
        cand = [v for v in classes[i] if T.degree[v] and all(pos[w] == (i - 1) % r for w in T[v])]
        cand = [cand[k] for k in rng.permutation(len(cand))]
        # leaves first: they block the fewest other candidates
        cand.sort(key=lambda v: T.degree[v])
        pick = []
        for v in cand:
            if len(pick) == need[i]:
                break
            if v in blocked:
                continue
            pick.append(v)
            ball = {v} | set(T[v])
            for w in T[v]:
                ball |= set(T[w])
            blocked |= ball
        if len(pick) < need[i]:
            return None
        hats.append(sorted(pick))
    return hats


def check_hats(T: nx.Graph, hats: Sequence[Sequence[int]]) -> bool:
    """Brute force: pairwise distance at least 3 across all selections."""
    flat = [v for h in hats for v in h]
    if len(set(flat)) != len(flat):
        return False
    dist = dict(nx.all_pairs_shortest_path_length(T, cutoff=2))
    return all(w not in dist[v] for v, w in combinations(flat, 2))


def dirac_tree_embed(G: PartitionedGraph, c: EdgeSetColouring, T, mu: float | None = None,
                     params: EmbedParams | None = None, seed: SeedLike = None, *, eps: float = 0.25,
                     d: float = 0.5, delta: int = 3, slack: float = 0.1, trim: float = 0.1,
                     R: nx.Graph | None = None, attempts: int = 20, reg_mode: str = "auto",
                     trials: int = 500) -> TreeEmbedding:
    """Rainbow copy of the spanning tree T in the clustered host G.

    ``G.parts[1:]`` are the clusters (``G.parts[0]`` may hold leftovers).  The
    clusters are ordered along a Hamilton cycle of the reduced graph, each is
    cleaned of vertices with low degree towards its cycle neighbours and
    trimmed further by ``trim`` (a fraction), the tree is split around the
    cycle, hat vertices absorb the size differences and are pre-embedded by a
    Hall matching onto the removed host vertices, and the rest goes to the
    blow-up embedder.
    """
    t_start = time.perf_counter()
    g = _tree_graph(T)
    n = G.vertex_count
    if g.number_of_nodes() != n:
        raise InstanceError(f"[precondition] tree has {g.number_of_nodes()} vertices, host has {n}")
    maxdeg = max((dg for _, dg in g.degree), default=0)
    if maxdeg > delta:
        raise InstanceError(f"[precondition] Delta(T) = {maxdeg} exceeds delta = {delta}")
    r = G.r
    if r < 3 or r % 2 == 0:
        raise InstanceError(f"[precondition] the number of clusters must be odd and >= 3, got {r}")
    if not c.covers(G):
        raise InstanceError("[precondition] colouring does not cover the host")
    report: dict = {"stages": {}}
    if R is None:
        R, verdicts = reduced_graph_of(G, eps, d, mode=reg_mode, trials=trials, seed=derive(seed, "R"))
        report["stages"]["reduced_graph"] = {"edges": sorted(map(list, R.edges)), "verdicts": verdicts}
    report["stages"]["dirac"] = dirac_check(R)
    cyc = hamilton_cycle(R)
    if cyc is None:
        raise InstanceError("[hamilton] the reduced graph has no Hamilton cycle")
    report["stages"]["hamilton"] = cyc
    V = [list(G.parts[i]) for i in cyc]          # V[i] is cluster i+1 along the cycle
    pool = list(G.parts[0])
    rng = derive(seed, "trim")

    # cleanup: low degree towards either cycle neighbour
    cleaned, moved = [], []
    for i in range(r):
        nxt, prv = set(V[(i + 1) % r]), set(V[(i - 1) % r])
        bad = [v for v in V[i]
               if len(G.neighbours(v) & nxt) < (d - eps) * len(nxt)
               or len(G.neighbours(v) & prv) < (d - eps) * len(prv)]
        keep = [v for v in V[i] if v not in set(bad)]
        extra = int(round(trim * len(V[i])))
        if extra:
            drop = set(rng.choice(keep, size=min(extra, len(keep)), replace=False).tolist())
            bad += sorted(drop)
            keep = [v for v in keep if v not in drop]
        cleaned.append(keep)
        moved.append(bad)
    report["stages"]["cleanup"] = {"removed": [len(b) for b in moved]}

    last = None
    for attempt in range(1, attempts + 1):
        tp = _stage("tree_partition", tree_cycle_partition, g, r, slack, derive(seed, "tree", attempt))
        if not verify_tree_partition(g, tp.classes):
            raise InvariantBreach("[tree_partition] tree edge between non-consecutive classes")
        Vp = [list(v) for v in cleaned]
        extra_moved = []
        for i in range(r):
            over = len(Vp[i]) - len(tp.classes[i])
            if over > 0:
                drop = set(derive(seed, "cap", attempt, i).choice(Vp[i], size=over, replace=False).tolist())
                extra_moved += sorted(drop)
                Vp[i] = [v for v in Vp[i] if v not in drop]
        need = [len(tp.classes[i]) - len(Vp[i]) for i in range(r)]
        hats = select_hats(g, tp.classes, need, derive(seed, "hats", attempt))
        if hats is None:
            last = {"need": need, "hat_counts": tp.hat_counts}
            continue
        break
    else:
        raise BudgetExhausted("[hats] hat-set too small in every attempt", {"stage": "hats", **(last or {})})
    if not check_hats(g, hats):
        raise InvariantBreach("[hats] selected hat vertices are not 2-independent")
    report["stages"]["tree_partition"] = {"sizes": [len(x) for x in tp.classes], "hat_counts": tp.hat_counts,
                                          "attempt": attempt}
    report["stages"]["hats"] = {"sizes": [len(h) for h in hats]}

    X0 = [v for h in hats for v in h]
    V0 = sorted(pool + [v for b in moved for v in b] + extra_moved)
    if len(X0) != len(V0):
        raise InvariantBreach(f"[hats] |X_0| = {len(X0)} but |V_0| = {len(V0)}")
    hat_class = {x: i for i, h in enumerate(hats) for x in h}
    thr = d * n / (2 * r)
    aux = BipartiteGraph(X0, V0)
    Vsets = [set(v) for v in Vp]
    for x in X0:
        prev = Vsets[(hat_class[x] - 1) % r]
        for v in V0:
            if len(G.neighbours(v) & prev) >= thr:
                aux.adj[aux.lindex(x), aux.rindex(v)] = True
    M = maximum_matching(aux)
    if len(M) < len(X0):
        viol = hall_violator(aux, M)
        raise InstanceError(f"[hall] no perfect matching of hats onto the exceptional pool; "
                            f"Hall violator of size {len(viol)} with {len(set().union(*(aux.neighbours_of_left(x) for x in viol)))} neighbours")
    phi0 = dict(M)
    report["stages"]["hall"] = {"matched": len(M), "threshold": thr}

    Xp = [[x for x in tp.classes[i] if x not in hat_class] for i in range(r)]
    H = PartitionedGraph([X0] + Xp, g.edges)
    Gp = PartitionedGraph([V0] + Vp, G.edges)
    Rc = nx.cycle_graph(range(1, r + 1))
    A = {}
    for i in range(r):
        B = BipartiteGraph.complete(H.parts[i + 1], Gp.parts[i + 1])
        for x in H.parts[i + 1]:
            hn = [y for y in g[x] if y in phi0]
            if len(hn) > 1:
                raise InvariantBreach(f"[candidacy] {x} has two hat neighbours")
            if hn:
                allowed = G.neighbours(phi0[hn[0]])
                row = B.lindex(x)
                B.adj[row, :] = [v in allowed for v in B.right]
        A[i + 1] = B
    if mu is None:
        mu = colour_boundedness(c)[0] / n
    I = BlowUpInstance(H, Gp, Rc, A, c, eps=eps, d=d, mu=mu, delta=max(delta, 2), phi0=phi0, form="general")
    for i in range(r):
        v = test_pair(Gp, Gp.parts[i + 1], Gp.parts[(i + 1) % r + 1], eps=min(0.99, 2 * eps ** 0.5), d=d,
                      flavour="lower-super", mode=reg_mode, trials=trials, seed=derive(seed, "clean", i))
        report["stages"].setdefault("cleaned_pairs", []).append(v.to_json())
    P = params or EmbedParams(strategy="direct")
    out = rainbow_blowup_embed(I, phi0, derive(seed, "embed"), P)
    ver = verify_spanning_embedding(G, c, g, out.phi)
    if not ver["ok"]:
        raise InvariantBreach(f"[verify] tree embedding failed: {ver}")
    report["embed"] = out.report
    report["verification"] = ver
    report["seconds"] = time.perf_counter() - t_start
    return TreeEmbedding(out.phi, I, report)


def verify_spanning_embedding(G: PartitionedGraph, c: EdgeSetColouring, T, phi: Mapping[int, int]) -> dict:
    """Independent check: phi is a bijection V(T) -> V(G) mapping every tree
    edge onto a host edge, with pairwise disjoint colour sets."""
    g = _as_nx(T)
    n = G.vertex_count
    bij = set(phi) == set(g.nodes) and sorted(phi.values()) == list(range(n))
    missing = [e for e in g.edges if not G.has_edge(phi[e[0]], phi[e[1]])] if bij else []
    ok_r, pair = is_rainbow(((phi[a], phi[b]) for a, b in g.edges), c) if bij and not missing else (False, None)
    return {"ok": bool(bij and not missing and ok_r), "bijection": bij,
            "edges": missing[:1], "rainbow": ok_r, "rainbow_witness": pair}


# partial embedding of a few exceptional vertices

@dataclass
class PartialEmbedding:
    C_prime: set[int]
    phi: dict
    S: dict
    rounds: list[list]
    classes: dict[tuple[int, int], set[int]]
    report: dict = field(default_factory=dict)


def _label_pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def partial_embed(G: PartitionedGraph, c: EdgeSetColouring, H: nx.Graph, X: Mapping[int, Sequence],
                  Y: Mapping[int, Sequence], R: nx.Graph, mu: float | None = None, eps: float = 0.1,
                  d_prime: float = 0.01, seed: SeedLike = None, attempts: int = 10,
                  conflict_attempts: int = 500, sampler_mode: str = "auto", enforce_size: bool = True,
                  reg_mode: str = "sampled", trials: int = 200) -> PartialEmbedding:
    """Rainbow embedding of H[X] into the clusters of G together with large
    candidate sets for the outside neighbours Y.

    ``X[i]``, ``Y[i]`` list the vertices of H assigned to cluster i (1..r).
    Returns C', phi and S_y with
      (i) phi(X_i) inside V_i,
      (ii) |S_y| >= d'n/r and S_y inside N_{G_{C'}}(phi(x)) for x in N(y) & X,
      (iii) distinct colours c(phi(x)v) over x in N(y) & X, for v in S_y,
    and phi rainbow using colours outside C'.  All of this is rechecked
    before returning.
    """
    n, r = G.vertex_count, G.r
    Xd = {i: list(X.get(i, ())) for i in range(1, r + 1)}
    Yd = {i: list(Y.get(i, ())) for i in range(1, r + 1)}
    part = {}
    for i in range(1, r + 1):
        for z in Xd[i] + Yd[i]:
            if z in part:
                raise InstanceError(f"[precondition] vertex {z} assigned twice")
            part[z] = i
    if set(part) != set(H.nodes):
        raise InstanceError("[precondition] X and Y must partition V(H)")
    if enforce_size and H.number_of_nodes() > eps * n / r + 1e-9:
        raise InstanceError(f"[precondition] |V(H)| = {H.number_of_nodes()} exceeds eps n / r = {eps * n / r:.1f}")
    for a, b in H.edges:
        if part[a] == part[b]:
            raise InstanceError(f"[precondition] edge {(a, b)} inside Z_{part[a]}")
        if not R.has_edge(part[a], part[b]):
            raise InstanceError(f"[precondition] edge {(a, b)} does not follow R")
    Xall = [x for i in Xd for x in Xd[i]]
    Yset = {y for i in Yd for y in Yd[i]}
    delta = max((dg for _, dg in H.degree), default=0)
    # 2-independent classes of X: greedy colouring of the square
    sq = square_nx(H).subgraph(Xall)
    col = nx.greedy_color(sq, strategy="largest_first") if Xall else {}
    T = max(col.values(), default=-1) + 1
    if T > delta * delta + 1:
        raise InvariantBreach(f"greedy colouring of H^2 used {T} > Delta^2+1 colours")
    rnd = {x: col[x] + 1 for x in Xall}
    rnd.update({y: T + 1 for y in Yset})
    rounds = [[x for x in Xall if rnd[x] == t] for t in range(1, T + 1)]
    # label pairs that actually carry H-edges; the others would never be used
    active = sorted({_label_pair(rnd[a], rnd[b]) for a, b in H.edges if a in rnd and b in rnd})
    palette = sorted(c.used_colours())
    if mu is None:
        mu = colour_boundedness(c)[0] / n
    report: dict = {"T": T, "active_pairs": [list(p) for p in active], "attempts": []}
    last_exc: Exception | None = None
    for attempt in range(1, attempts + 1):
        try:
            res = _partial_attempt(G, c, H, part, rnd, rounds, T, active, palette, n, r, d_prime,
                                   derive(seed, "partial", attempt), conflict_attempts, sampler_mode,
                                   reg_mode, trials, eps)
        except BudgetExhausted as exc:
            report["attempts"].append({"attempt": attempt, "reason": str(exc), **exc.diagnostics})
            last_exc = exc
            continue
        ver = verify_partial_embedding(G, c, H, Xd, Yd, res, d_prime)
        if not ver["ok"]:
            raise InvariantBreach(f"[verify] partial embedding failed: {ver}")
        res.report.update(report)
        res.report["verification"] = ver
        res.report["attempt"] = attempt
        return res
    raise BudgetExhausted(f"[partial] no attempt succeeded: {last_exc}", {"stage": "partial", **report})


def _partial_attempt(G, c, H, part, rnd, rounds, T, active, palette, n, r, d_prime, rng,
                     conflict_attempts, sampler_mode, reg_mode, trials, eps) -> PartialEmbedding:
    L = max(1, len(active))
    split = random_colour_partition(palette, L, seed=rng)
    classes = {p: split[k] for k, p in enumerate(active)}
    colour_class = {}
    for p, cs in classes.items():
        for a in cs:
            colour_class[a] = p

    # G^{p}: host edges whose colours all fall in the class of label pair p
    nbp: dict = {p: defaultdict(set) for p in active}
    for u, w in G.edges:
        cs = c(u, w)
        owners = {colour_class.get(a) for a in cs}
        if len(owners) == 1:
            p = owners.pop()
            if p is not None:
                nbp[p][u].add(w)
                nbp[p][w].add(u)

    def nbhd(v: int, p) -> set[int]:
        return nbp[p].get(v, set())

    dens_cache: dict = {}

    def pair_density(p, i: int, j: int) -> float:
        key = (p, i, j)
        if key not in dens_cache:
            Vj = set(G.parts[j])
            tot = sum(len(nbhd(u, p) & Vj) for u in G.parts[i])
            dens_cache[key] = tot / (len(G.parts[i]) * len(G.parts[j]))
        return dens_cache[key]

    verdicts = {}
    for p in active:
        for i, j in sorted({tuple(sorted((part[a], part[b]))) for a, b in H.edges
                            if _label_pair(rnd[a], rnd[b]) == p}):
            sub = BipartiteGraph(G.parts[i], G.parts[j])
            for a, u in enumerate(G.parts[i]):
                for w in nbhd(u, p):
                    if w in sub._ri:
                        sub.adj[a, sub.rindex(w)] = True
            dens = sub.density()
            entry = {"density": dens}
            if dens > 0:
                entry["lower_regular"] = test_pair(sub, eps=min(0.99, 2 * eps), d=dens / 2, flavour="lower-regular",
                                                   mode=reg_mode, trials=trials, seed=rng).passed
            verdicts[f"{p[0]},{p[1]}:{i}-{j}"] = entry
    S = {z: set(G.parts[part[z]]) for z in part}
    phi: dict = {}
    used: set[int] = set()
    history = []
    for t in range(1, T + 1):
        Xt = rounds[t - 1]
        # shrink: keep v only if it keeps 3/4 of its pair density into every later neighbour's set
        for x in Xt:
            keep = set(S[x])
            for y in H[x]:
                if y in phi or rnd[y] <= t:
                    continue
                p = _label_pair(t, rnd[y])
                Sy = S[y]
                dens = pair_density(p, part[x], part[y])
                keep = {v for v in keep if len(nbhd(v, p) & Sy) >= 0.75 * dens * len(Sy)}
            S[x] = keep
        edges = [(x, v) for x in Xt for v in S[x] if v not in used]
        if any(not any(e[0] == x for e in edges) for x in Xt):
            raise BudgetExhausted("candidate set of a round vertex is empty", {"round": t})
        # conflicts: shared colours among the edges back to embedded neighbours
        bucket = defaultdict(list)
        for x, v in edges:
            back = [phi[w] for w in H[x] if w in phi]
            cols = set()
            for u in back:
                cols |= c(u, v)
            for a in cols:
                bucket[a].append((x, v))
        pairs = set()
        for a, es in bucket.items():
            for e, f in combinations(es, 2):
                if e[0] != f[0] and e[1] != f[1]:
                    pairs.add((e, f))
        F = ConflictSystem(pairs)
        X_parts = [[x for x in Xt if part[x] == i] for i in range(1, r + 1)]
        V_parts = [[v for v in G.parts[i] if v not in used] for i in range(1, r + 1)]
        keep_i = [k for k in range(r) if X_parts[k]]
        sigma = covering_conflict_free_matching([X_parts[k] for k in keep_i], [V_parts[k] for k in keep_i],
                                                edges, F, seed=rng, max_attempts=conflict_attempts,
                                                mode=sampler_mode)
        phi.update(sigma)
        used |= set(sigma.values())
        history.append({"round": t, "embedded": len(sigma), "conflicts": len(F)})
        for z in S:
            if z in phi:
                continue
            before = S[z]
            new = before - used
            for w in H[z]:
                if w in sigma:
                    new &= nbhd(sigma[w], _label_pair(t, rnd[z]))
            if not new <= before or new & used:
                raise InvariantBreach("candidate sets must shrink and avoid used images")
            S[z] = new
            if not new:
                raise BudgetExhausted("candidate set collapsed", {"round": t, "vertex": z})
    C_prime = set().union(*(classes[p] for p in classes if p[1] == T + 1)) if classes else set()
    Sy = {y: S[y] for y in S if rnd[y] == T + 1}
    for y, s in Sy.items():
        if len(s) < d_prime * n / r:
            raise BudgetExhausted("candidate-set collapse below d'n/r",
                                  {"vertex": y, "size": len(s), "needed": d_prime * n / r})
    return PartialEmbedding(C_prime, phi, Sy, rounds, classes,
                            {"rounds": history, "slice_verdicts": verdicts})


def verify_partial_embedding(G: PartitionedGraph, c: EdgeSetColouring, H: nx.Graph, X: Mapping[int, Sequence],
                             Y: Mapping[int, Sequence], res: PartialEmbedding, d_prime: float) -> dict:
    """Recheck conclusions (i)-(iii) from scratch."""
    n, r = G.vertex_count, G.r
    Cp = res.C_prime
    phi, S = res.phi, res.S
    Xall = [x for i in X for x in X[i]]
    checks = {}
    wit = None
    for i in X:
        for x in X[i]:
            if x not in phi or phi[x] not in set(G.parts[i]):
                wit = x
                break
    imgs = [phi.get(x) for x in Xall]
    inj = len(set(imgs)) == len(imgs)
    checks["i_location"] = {"ok": wit is None and inj, "witness": wit}
    hx = [(a, b) for a, b in H.subgraph(Xall).edges]
    edges_ok = all(G.has_edge(phi[a], phi[b]) for a, b in hx) if wit is None else False
    outside = all(not (c(phi[a], phi[b]) & Cp) for a, b in hx) if edges_ok else False
    rain = is_rainbow(((phi[a], phi[b]) for a, b in hx), c)[0] if edges_ok else False
    checks["rainbow_outside_C_prime"] = {"ok": edges_ok and outside and rain}
    wit = None
    for i in Y:
        Vi = set(G.parts[i])
        for y in Y[i]:
            s = S.get(y, set())
            if len(s) < d_prime * n / r - 1e-9 or not s <= Vi or s & set(imgs):
                wit = {"y": y, "size": len(s)}
                break
            for x in H[y]:
                if x in phi and not all(G.has_edge(phi[x], v) and c(phi[x], v) <= Cp for v in s):
                    wit = {"y": y, "x": x}
                    break
            if wit:
                break
        if wit:
            break
    checks["ii_candidates"] = {"ok": wit is None, "witness": wit}
    wit = None
    for i in Y:
        for y in Y[i]:
            xs = [x for x in H[y] if x in phi]
            for v in S.get(y, ()):
                for a, b in combinations(xs, 2):
                    if c(phi[a], v) & c(phi[b], v):
                        wit = {"y": y, "v": v, "x": [a, b]}
                        break
                if wit:
                    break
            if wit:
                break
    checks["iii_distinct_colours"] = {"ok": wit is None, "witness": wit}
    return {"ok": all(v["ok"] for v in checks.values()), "checks": checks}


# quasi-random hosts

@dataclass
class QuasiRandomEmbedding:
    phi: dict[int, int]
    instance: BlowUpInstance
    report: dict = field(default_factory=dict)


def dense_spot_check(G: nx.Graph, eps: float, d: float, samples: int = 200, seed: SeedLike = None) -> dict:
    """Sample disjoint S, T of size ceil(eps n) and look for e(S,T) < d|S||T|."""
    rng = make_rng(seed)
    nodes = np.array(sorted(G.nodes))
    n = len(nodes)
    k = max(1, int(np.ceil(eps * n)))
    if 2 * k > n:
        return {"ok": True, "samples": 0}
    A = nx.to_numpy_array(G, nodelist=nodes.tolist(), dtype=bool)
    worst = 1.0
    for _ in range(samples):
        perm = rng.permutation(n)
        S, Tt = perm[:k], perm[k:2 * k]
        dens = A[np.ix_(S, Tt)].mean()
        worst = min(worst, float(dens))
        if dens < d:
            return {"ok": False, "samples": samples, "witness": {"S": nodes[S].tolist(), "T": nodes[Tt].tolist(),
                                                               "density": float(dens)}}
    return {"ok": True, "samples": samples, "worst_density": worst}


def quasirandom_embed(G, H, c: EdgeSetColouring, mu: float | None = None, eps: float = 0.25, d: float = 0.3,
                      seed: SeedLike = None, params: EmbedParams | None = None, partition_attempts: int = 20,
                      reg_mode: str = "sampled", trials: int = 300, spot_samples: int = 200) -> QuasiRandomEmbedding:
    """Rainbow spanning copy of H (max degree Delta) in a dense quasi-random G.

    H is split into Delta+1 equitable independent classes, V(G) into random
    parts of matching sizes (retried until every pair is lower super-regular)
    and the blow-up embedder runs on the complete reduced graph K_{Delta+1}.
    """
    t_start = time.perf_counter()
    g, h = _as_nx(G), _as_nx(H)
    n = g.number_of_nodes()
    if sorted(g.nodes) != list(range(n)) or sorted(h.nodes) != list(range(h.number_of_nodes())):
        raise InstanceError("[precondition] vertices must be 0..n-1")
    if h.number_of_nodes() != n:
        raise InstanceError(f"[precondition] H has {h.number_of_nodes()} vertices, G has {n}")
    mindeg = min((dg for _, dg in g.degree), default=0)
    if mindeg < d * n:
        raise InstanceError(f"[precondition] minimum degree {mindeg} < d n = {d * n:.1f}")
    spot = dense_spot_check(g, eps, d, spot_samples, derive(seed, "spot"))
    if not spot["ok"]:
        raise InstanceError(f"[precondition] dense spot check failed: {spot['witness']['density']:.3f} < {d}")
    delta = max((dg for _, dg in h.degree), default=0)
    k = delta + 1
    eq = equitable_colouring(h, k)
    sizes = [len(cl) for cl in eq.classes]
    Gp_full = PartitionedGraph([list(range(n))], g.edges)
    report: dict = {"delta": delta, "class_sizes": sizes, "spot_check": spot, "partition_attempts": []}
    for attempt in range(1, partition_attempts + 1):
        perm = derive(seed, "partition", attempt).permutation(n).tolist()
        parts, s = [], 0
        for z in sizes:
            parts.append(sorted(perm[s:s + z]))
            s += z
        verdicts, ok = {}, True
        for i, j in combinations(range(k), 2):
            v = test_pair(Gp_full, parts[i], parts[j], eps=eps, d=d, flavour="lower-super", mode=reg_mode,
                          trials=trials, seed=derive(seed, "qr-pair", attempt, i, j))
            verdicts[f"{i + 1}-{j + 1}"] = v.to_json()
            ok &= v.passed
        report["partition_attempts"].append({"attempt": attempt, "ok": bool(ok)})
        if ok:
            break
    else:
        raise BudgetExhausted("[partition] no random partition with all pairs super-regular",
                              {"stage": "partition", **report})
    report["verdicts"] = verdicts
    Hp = PartitionedGraph([[]] + eq.classes, h.edges)
    Gp = PartitionedGraph([[]] + parts, g.edges)
    Rk = nx.complete_graph(range(1, k + 1)) if k > 1 else nx.empty_graph([1])
    if mu is None:
        mu = colour_boundedness(c)[0] / n
    I = BlowUpInstance(Hp, Gp, Rk, complete_candidacy(Hp, Gp), c, eps=eps, d=d, mu=mu,
                       delta=max(delta, k - 1, 1), phi0={}, form="general")
    P = params or EmbedParams(strategy="direct")
    out = rainbow_blowup_embed(I, {}, derive(seed, "embed"), P)
    ver = verify_embedding(I, out.phi, {})
    if not ver["ok"]:
        raise InvariantBreach(f"[verify] {ver}")
    report["embed"] = out.report
    report["verification"] = ver
    report["seconds"] = time.perf_counter() - t_start
    return QuasiRandomEmbedding(out.phi, I, report)
