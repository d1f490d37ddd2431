"""Reduction of a general blow-up instance to the matchings form, and the
full pipeline (merge colours, reduce, reserve, embed rounds, verify).

The reduced instance reuses the vertex ids of the original one: only the
partitions change.  So an embedding of the completed target H* restricts to
an embedding of H without any relabelling.
"""
from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import networkx as nx
import numpy as np

from ..errors import BudgetExhausted, InstanceError, InvariantBreach
from ..graphcore import BipartiteGraph, PartitionedGraph, edge_key
from ..partition import equitable_colouring, round_colouring
from ..regularity import prune_to_super_regular
from ..rng import SeedLike, derive, make_rng
from .colours import merge_rare_colours, merge_summary
from .instance import BlowUpInstance, check_feasible, validate_instance, verify_embedding
from .rounds import EmbedParams, EmbedResult, embed_rounds, reserve_for


@dataclass
class Reduction:
    instance: BlowUpInstance            # matchings form, clusters indexed 1..r*Delta^2
    phi0: dict[int, int]
    cluster_of: dict[tuple[int, int], int]
    B: list[int]
    report: dict = field(default_factory=dict)

    def translate(self, phi: Mapping[int, int]) -> dict[int, int]:
        """Embedding of H* -> embedding of H (ids are shared)."""
        return dict(phi)


def _far_from(H: PartitionedGraph, S: set[int]) -> set[int]:
    """Vertices at distance <= 2 from S."""
    near = set(S)
    for s in S:
        for w in H.neighbours(s):
            near.add(w)
            near |= H.neighbours(w)
    return near


def _choose_B(H: PartitionedGraph, X0: set[int], a: dict[int, int], rng) -> list[int]:
    chosen: list[int] = []
    blocked = _far_from(H, X0)
    for i in sorted(a):
        if a[i] == 0:
            continue
        cand = [x for x in H.parts[i] if x not in blocked]
        rng.shuffle(cand)
        got = 0
        for x in cand:
            if x in blocked:
                continue
            chosen.append(x)
            blocked |= _far_from(H, {x})
            got += 1
            if got == a[i]:
                break
        if got < a[i]:
            raise BudgetExhausted(f"cannot move {a[i]} vertices of cluster {i} to the exceptional set",
                                  {"stuck_cluster": i, "needed": a[i], "found": got})
    return chosen


def _square_inside(H: PartitionedGraph, cls: list[int], exceptional: set[int]) -> nx.Graph:
    """Graph on cls joining vertices with a common neighbour outside the
    exceptional set (cls itself is independent)."""
    inside = set(cls)
    g = nx.Graph()
    g.add_nodes_from(cls)
    mids = {w for x in cls for w in H.neighbours(x) if w not in exceptional}
    for w in mids:
        nb = sorted(H.neighbours(w) & inside)
        for p in range(len(nb)):
            for q in range(p + 1, len(nb)):
                g.add_edge(nb[p], nb[q])
    return g


def reduce_to_matchings(I: BlowUpInstance, phi0: Mapping[int, int] | None = None, seed: SeedLike = None,
                        params: EmbedParams | None = None) -> Reduction:
    P = params or EmbedParams()
    phi0 = dict(I.phi0 if phi0 is None else phi0)
    H, G, R = I.H, I.G, I.R
    r, D = I.r, max(1, I.delta)
    q = D * D
    eps, d = I.eps, I.d
    rng = make_rng(derive(seed, "reduce"))
    n1 = q * (min(len(H.parts[i]) for i in I.clusters()) // q)
    if n1 == 0:
        raise InstanceError(f"clusters smaller than Delta^2 = {q}")
    a = {i: len(H.parts[i]) - n1 for i in I.clusters()}
    X0 = set(H.parts[0])
    B = _choose_B(H, X0, a, rng)
    X0s = X0 | set(B)
    # refine X_i' into Delta^2 sets of size n'/Delta^2 at distance >= 3
    Xstar: dict[tuple[int, int], list[int]] = {}
    for i in I.clusters():
        rest = [x for x in H.parts[i] if x not in X0s]
        classes = equitable_colouring(_square_inside(H, rest, X0s), q).classes
        for j, cl in enumerate(classes, start=1):
            Xstar[(i, j)] = sorted(cl)
    # extend phi0 to B
    phis = dict(phi0)
    used = set(phi0.values())
    suitable = {}
    for x in B:
        i = int(H.part_of[x])
        best, best_score = None, -1.0
        for v in I.A[i].neighbours_of_left(x):
            if v in used:
                continue
            score = 1.0
            for y in H.neighbours(x):
                k = int(H.part_of[y])
                if k == 0:
                    continue
                N = set(I.A[k].neighbours_of_left(y))
                if N:
                    score = min(score, len(N & G.neighbours(v)) / len(N))
            if score > best_score:
                best, best_score = v, score
        if best is None:
            raise BudgetExhausted(f"no free candidate for the new exceptional vertex {x}", {"vertex": x})
        phis[x] = best
        used.add(best)
        suitable[x] = best_score >= d - eps - 1e-9
    # restrict candidates of vertices adjacent to B
    Aprime = {}
    for i in I.clusters():
        A = I.A[i].adj.copy()
        cols = list(I.A[i].right)
        for row, y in enumerate(I.A[i].left):
            for x in H.neighbours(y):
                if x in phis and x not in phi0:
                    mask = np.array([G.has_edge(phis[x], v) for v in cols])
                    A[row] &= mask
        Aprime[i] = I.A[i].with_adj(A)
    # refine V_i' and match parts
    dprime = d * d / 2
    size = n1 // q
    Vstar: dict[tuple[int, int], list[int]] = {}
    tries_used = 0
    for attempt in range(1, P.refine_attempts + 1):
        tries_used = attempt
        Vstar.clear()
        for i in I.clusters():
            Ap = Aprime[i]
            rest = [v for v in G.parts[i] if v not in used]
            degs = {v: [int(Ap.adj[[Ap.lindex(x) for x in Xstar[(i, j)]], Ap.rindex(v)].sum())
                        for j in range(1, q + 1)] for v in rest}
            good = [v for v in rest
                    if all(degs[v][j - 1] >= (dprime - 8 * q * eps) * size for j in range(1, q + 1))]
            goodset = set(good)
            cap = {j: size for j in range(1, q + 1)}
            for j in range(1, q + 1):
                Vstar[(i, j)] = []
            for v in rest:
                if v in goodset:
                    continue
                order = sorted(range(1, q + 1), key=lambda j: -degs[v][j - 1])
                j = next(j for j in order if cap[j] > 0)
                Vstar[(i, j)].append(v)
                cap[j] -= 1
            rng.shuffle(good)
            pos = 0
            for j in range(1, q + 1):
                Vstar[(i, j)].extend(good[pos:pos + cap[j]])
                pos += cap[j]
        if _refinement_ok(I, Aprime, Xstar, Vstar, eps, d, dprime, size):
            break
    else:
        raise BudgetExhausted("random refinement of the host clusters missed the degree conditions",
                              {"attempts": P.refine_attempts})
    # new instance on r*Delta^2 clusters; ids are unchanged
    cluster_of = {key: k for k, key in enumerate(sorted(Xstar), start=1)}
    Rs = nx.Graph()
    Rs.add_nodes_from(cluster_of.values())
    for (i, j), k in cluster_of.items():
        for (i2, j2), k2 in cluster_of.items():
            if k < k2 and R.has_edge(i, i2):
                Rs.add_edge(k, k2)
    Hparts = [sorted(X0s)] + [Xstar[key] for key in sorted(Xstar)]
    Gparts = [sorted(phis.values())] + [sorted(Vstar[key]) for key in sorted(Vstar)]
    Hedges = set(H.edges)
    part_of = {x: k for key, k in cluster_of.items() for x in Xstar[key]}
    for k, k2 in Rs.edges:
        Xa, Xb = Xstar[_key(cluster_of, k)], Xstar[_key(cluster_of, k2)]
        Xbs = set(Xb)
        matched_a = {x for x in Xa if H.neighbours(x) & Xbs}
        matched_b = {y for y in Xb if H.neighbours(y) & set(Xa)}
        for x, y in zip([x for x in Xa if x not in matched_a], [y for y in Xb if y not in matched_b]):
            Hedges.add(edge_key(x, y))
    Hs = PartitionedGraph(Hparts, Hedges)
    Gs = PartitionedGraph(Gparts, G.edges)
    As = {}
    verdicts = {}
    for key, k in cluster_of.items():
        i = key[0]
        Ap = Aprime[i]
        li = [Ap.lindex(x) for x in Xstar[key]]
        Vk = sorted(Vstar[key])
        ri = [Ap.rindex(v) for v in Vk]
        Bk = BipartiteGraph(Xstar[key], Vk, Ap.adj[np.ix_(li, ri)])
        if P.super_regularize:
            # target density theta = density of the block itself
            eps_p = min(0.9, 2 * math.sqrt(8 * q * eps))
            Bk = prune_to_super_regular(Bk, eps=eps_p, d=math.sqrt(2 * max(Bk.density(), 1e-9)) * (1 - 1e-12),
                                        eps_prime=eps_p, seed=derive(seed, "super", k), mode=P.reg_mode,
                                        trials=P.trials)
        As[k] = Bk
    Ired = BlowUpInstance(Hs, Gs, Rs, As, I.c, eps=eps, d=dprime, mu=I.mu, delta=I.delta,
                          phi0=phis, form="matchings")
    val = validate_instance(Ired, "matchings", regularity=False)
    if not val["ok"]:
        raise InvariantBreach(f"reduced instance is not in matchings form: {val['checks']}")
    feas = check_feasible(Ired, phis, 2 * I.delta * I.mu * I.n)
    report = {"n_prime": n1, "parts": q, "B": len(B), "suitable_images": sum(suitable.values()),
              "refine_attempts": tries_used, "clusters": len(cluster_of),
              "added_edges": Hs.edge_count - H.edge_count, "feasibility": feas,
              "EXC1": feas["EXC1"]["ok"], "EXC2": feas["EXC2"]["ok"]}
    if not (feas["EXC1"]["ok"] and feas["EXC2"]["ok"]):
        raise InvariantBreach(f"reduction broke feasibility: {feas}")
    return Reduction(Ired, phis, cluster_of, B, report)


def _key(cluster_of, k):
    for key, kk in cluster_of.items():
        if kk == k:
            return key
    raise KeyError(k)


def _refinement_ok(I, Aprime, Xstar, Vstar, eps, d, dprime, size) -> bool:
    slack = 3 * math.sqrt(eps)
    for (i, j), Vs in Vstar.items():
        Vs_set = set(Vs)
        Ap = Aprime[i]
        cols = [Ap.rindex(v) for v in Vs]
        for x in Xstar[(i, j)]:
            if Ap.adj[Ap.lindex(x), cols].sum() < (dprime - slack) * len(Vs) - 1e-9:
                return False
        for i2 in I.R.neighbors(i):
            for v in I.G.parts[i2]:
                if len(I.G.neighbours(v) & Vs_set) < (d - slack) * len(Vs) - 1e-9:
                    return False
    return True


def _stage(name: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (BudgetExhausted, InvariantBreach, InstanceError) as exc:
        if isinstance(exc, BudgetExhausted):
            exc.diagnostics.setdefault("stage", name)
        exc.args = (f"[{name}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
        raise


def rainbow_blowup_embed(I: BlowUpInstance, phi0: Mapping[int, int] | None = None, seed: SeedLike = None,
                         params: EmbedParams | None = None) -> EmbedResult:
    """Rainbow embedding of H into G extending phi0 and respecting the
    candidacy graphs, verified against the original instance."""
    P = params or EmbedParams()
    phi0 = dict(I.phi0 if phi0 is None else phi0)
    timings = {}
    t0 = time.perf_counter()
    val = validate_instance(I, regularity=False)
    if not val["ok"]:
        raise InstanceError(f"[validate] invalid instance: "
                            f"{ {k: v for k, v in val['checks'].items() if not v['ok']} }")
    feas = check_feasible(I, phi0, 2 * I.delta * I.mu * I.n)
    timings["validate"] = time.perf_counter() - t0
    work = I.with_(phi0=phi0)
    report: dict = {"feasibility": feas, "stages": []}
    if P.merge:
        t0 = time.perf_counter()
        c2, trans = _stage("merge", merge_rare_colours, work, phi0, I.mu if P.mu is None else P.mu)
        report["merge"] = merge_summary(I, I.c, c2)
        work = work.with_(c=c2)
        timings["merge"] = time.perf_counter() - t0
        report["stages"].append("merge")
    red = None
    if work.form != "matchings" and P.strategy == "reduce":
        t0 = time.perf_counter()
        red = _stage("reduce", reduce_to_matchings, work, phi0, derive(seed, "reduce"), P)
        work = red.instance
        report["reduction"] = red.report
        timings["reduce"] = time.perf_counter() - t0
        report["stages"].append("reduce")
    elif P.strategy not in ("reduce", "direct"):
        raise ValueError(f"unknown strategy {P.strategy!r}")
    t0 = time.perf_counter()
    psi = round_colouring(work.R, force_T=P.force_T)
    res = _stage("reserve", reserve_for, work, work.phi0, psi, P, seed, reduced=red is not None, R=I.R)
    report["reservation_mode"] = res.mode
    timings["reserve"] = time.perf_counter() - t0
    report["stages"].append("reserve")
    t0 = time.perf_counter()
    out = _stage("rounds", embed_rounds, work, work.phi0, derive(seed, "rounds"), P, res)
    timings["rounds"] = time.perf_counter() - t0
    report["stages"].append("rounds")
    phi = red.translate(out.phi) if red is not None else out.phi
    ver = verify_embedding(I, phi, phi0)
    if not ver["ok"]:
        raise InvariantBreach(f"[verify] final embedding failed: {ver['checks']}")
    report.update(out.report)
    report["verification"] = ver
    report["timings"] = timings
    return EmbedResult(phi, report)
