"""Blow-up instances: the data, structural validation, feasibility of the
exceptional pre-embedding, verification of a finished embedding and the
JSON format.

Vertex ids of H and G are shared with their PartitionedGraph objects.  Part 0
of either graph is the exceptional part (X_0, V_0) and may be empty.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import networkx as nx
import numpy as np

from ..errors import InstanceError
from ..graphcore import (BipartiteGraph, EdgeSetColouring, PartitionedGraph, edge_key,
                         graph_from_json, graph_to_json, is_rainbow)
from ..regularity import test_pair
from ..rng import derive


@dataclass
class BlowUpInstance:
    H: PartitionedGraph
    G: PartitionedGraph
    R: nx.Graph
    A: dict[int, BipartiteGraph]
    c: EdgeSetColouring
    eps: float = 0.1
    d: float = 0.5
    mu: float = 0.05
    delta: int = 2
    phi0: dict[int, int] = field(default_factory=dict)
    form: str = "general"

    @property
    def r(self) -> int:
        return self.G.r

    @property
    def n(self) -> int:
        return self.G.vertex_count

    def X(self, i: int) -> tuple[int, ...]:
        return self.H.parts[i]

    def V(self, i: int) -> tuple[int, ...]:
        return self.G.parts[i]

    def clusters(self) -> range:
        return range(1, self.r + 1)

    def with_(self, **kw) -> "BlowUpInstance":
        data = dict(self.__dict__)
        data.update(kw)
        return BlowUpInstance(**data)


def complete_candidacy(H: PartitionedGraph, G: PartitionedGraph) -> dict[int, BipartiteGraph]:
    return {i: BipartiteGraph.complete(H.parts[i], G.parts[i]) for i in range(1, G.r + 1)}


def _check(ok: bool, witness=None) -> dict:
    return {"ok": bool(ok), "witness": witness}


def _h_between(H: PartitionedGraph, Xi, Xj) -> list[tuple[int, int]]:
    Xj = set(Xj)
    return [(x, y) for x in Xi for y in H.neighbours(x) if y in Xj]


def validate_instance(I: BlowUpInstance, form: str | None = None, regularity: bool = True,
                      mode: str = "auto", trials: int = 2000, seed=0) -> dict:
    """Structural checks with witnesses, plus regularity and size hypotheses
    that are only reported.  ``report["ok"]`` reflects the structural checks."""
    form = form or I.form
    if form not in ("general", "matchings"):
        raise ValueError(f"unknown form {form!r}")
    H, G, R = I.H, I.G, I.R
    checks: dict[str, dict] = {}
    hyp: dict[str, dict] = {}
    checks["part_count"] = _check(H.r == G.r, {"H": H.r, "G": G.r} if H.r != G.r else None)
    r = min(H.r, G.r)
    nodes_ok = set(R.nodes) == set(range(1, r + 1))
    checks["reduced_graph_nodes"] = _check(nodes_ok, None if nodes_ok else sorted(R.nodes))
    bad = [(i, len(H.parts[i]), len(G.parts[i])) for i in range(r + 1) if len(H.parts[i]) != len(G.parts[i])]
    checks["sizes"] = _check(not bad, bad[0] if bad else None)
    wit = None
    for i in range(r + 1):
        for x, y in _h_between(H, H.parts[i], H.parts[i]):
            wit = {"part": i, "edge": [x, y]}
            break
        if wit:
            break
    checks["independent_parts"] = _check(wit is None, wit)
    wit = None
    for i in range(1, r + 1):
        for j in range(i + 1, r + 1):
            if not R.has_edge(i, j):
                e = _h_between(H, H.parts[i], H.parts[j])
                if e:
                    wit = {"pair": [i, j], "edge": list(e[0])}
                    break
        if wit:
            break
    checks["edges_follow_R"] = _check(wit is None, wit)
    wit = None
    for i in range(1, r + 1):
        A = I.A.get(i)
        if A is None or A.left != tuple(H.parts[i]) or A.right != tuple(G.parts[i]):
            wit = {"cluster": i}
            break
    checks["candidacy_sides"] = _check(wit is None, wit)
    checks["colouring_covers"] = _check(I.c.covers(G))
    X0, V0 = set(H.parts[0]), set(G.parts[0])
    phi_ok = set(I.phi0) == X0 and set(I.phi0.values()) == V0 and len(set(I.phi0.values())) == len(I.phi0)
    checks["phi0_bijection"] = _check(phi_ok, None if phi_ok else {"domain": sorted(I.phi0)[:10]})
    if form == "matchings":
        wit = None
        for i, j in sorted(tuple(sorted(e)) for e in R.edges):
            deg_i, deg_j = defaultdict(int), defaultdict(int)
            for x, y in _h_between(H, H.parts[i], H.parts[j]):
                deg_i[x] += 1
                deg_j[y] += 1
            for side, part, deg in ((i, H.parts[i], deg_i), (j, H.parts[j], deg_j)):
                for x in part:
                    if deg[x] != 1:
                        wit = {"pair": [i, j], "vertex": x, "degree": deg[x]}
                        break
                if wit:
                    break
            if wit:
                break
        checks["perfect_matchings"] = _check(wit is None, wit)
        wit = next(({"vertex": x, "degree": len(H.neighbours(x) & X0)}
                    for x in range(H.vertex_count) if x not in X0 and len(H.neighbours(x) & X0) > I.delta), None)
        checks["exceptional_degree"] = _check(wit is None, wit)
    else:
        dR = max((deg for _, deg in R.degree), default=0)
        checks["reduced_degree"] = _check(dR <= I.delta, None if dR <= I.delta else {"max_degree": dR})
        wit = next(({"vertex": x, "degree": H.degree(x)}
                    for x in range(H.vertex_count) if x not in X0 and H.degree(x) > I.delta), None)
        checks["bounded_degree"] = _check(wit is None, wit)
        lim = (2 * I.delta) ** -4
        cnt = {i: sum(1 for x in H.parts[i] if H.neighbours(x) & X0) for i in range(1, r + 1)}
        worst = max(cnt, key=lambda i: cnt[i] / max(1, len(H.parts[i])), default=None)
        ok = all(cnt[i] <= lim * len(H.parts[i]) for i in cnt)
        hyp["few_exceptional_neighbours"] = _check(ok, None if ok else {"cluster": worst, "count": cnt[worst]})
        nr = I.n / max(r, 1)
        far = [i for i in range(1, r + 1) if abs(len(G.parts[i]) - nr) > I.eps * nr + 1e-9]
        hyp["cluster_sizes"] = _check(not far, far[:5] or None)
    report = {"form": form, "ok": all(v["ok"] for v in checks.values()), "checks": checks,
              "hypotheses": hyp, "regularity": {}}
    if regularity and report["ok"]:
        for i, j in sorted(tuple(sorted(e)) for e in R.edges):
            v = test_pair(G, list(G.parts[i]), list(G.parts[j]), eps=I.eps, d=I.d, flavour="lower-regular",
                          mode=mode, trials=trials, seed=derive(seed, "host", i, j))
            report["regularity"][f"G{i}-{j}"] = v.to_json()
        for i in range(1, r + 1):
            v = test_pair(I.A[i], eps=I.eps, d=I.d, flavour="lower-super", mode=mode, trials=trials,
                          seed=derive(seed, "cand", i))
            report["regularity"][f"A{i}"] = v.to_json()
    return report


def colour_degree_table(G: PartitionedGraph, c: EdgeSetColouring, vertices) -> dict[int, dict[int, int]]:
    out = {}
    for v in vertices:
        cnt: dict[int, int] = defaultdict(int)
        for w in G.neighbours(v):
            for a in c(v, w):
                cnt[a] += 1
        out[v] = dict(cnt)
    return out


def exc3_loads(I: BlowUpInstance, phi0: Mapping[int, int], c: EdgeSetColouring | None = None) -> dict[int, int]:
    """alpha -> sum over x in X_0 of d^alpha_G(phi0(x)) * d_H(x)."""
    c = c or I.c
    load: dict[int, int] = defaultdict(int)
    table = colour_degree_table(I.G, c, [phi0[x] for x in phi0])
    for x, v in phi0.items():
        dh = I.H.degree(x)
        if dh:
            for a, k in table[v].items():
                load[a] += k * dh
    return dict(load)


def check_feasible(I: BlowUpInstance, phi0: Mapping[int, int] | None = None, D: float = 0.0,
                   c: EdgeSetColouring | None = None) -> dict:
    """Evaluate the three feasibility conditions of an exceptional bijection."""
    phi0 = dict(I.phi0 if phi0 is None else phi0)
    c = c or I.c
    X0, V0 = set(I.H.parts[0]), set(I.G.parts[0])
    if set(phi0) != X0 or set(phi0.values()) != V0 or len(set(phi0.values())) != len(phi0):
        raise InstanceError("phi0 is not a bijection from X_0 onto V_0")
    H, G = I.H, I.G
    out = {"D": D}
    wit = None
    for x0 in sorted(X0):
        Nv = G.neighbours(phi0[x0])
        for y in sorted(H.neighbours(x0)):
            j = int(H.part_of[y])
            if j == 0:
                continue
            missing = set(I.A[j].neighbours_of_left(y)) - Nv
            if missing:
                wit = {"x0": x0, "y": y, "v": min(missing)}
                break
        if wit:
            break
    out["EXC1"] = _check(wit is None, wit)
    wit = None
    for y in range(H.vertex_count):
        j = int(H.part_of[y])
        if j == 0:
            continue
        ex = sorted(H.neighbours(y) & X0)
        if len(ex) < 2:
            continue
        for v in I.A[j].neighbours_of_left(y):
            for a in range(len(ex)):
                ca = c.get(phi0[ex[a]], v, frozenset())
                for b in range(a + 1, len(ex)):
                    common = ca & c.get(phi0[ex[b]], v, frozenset())
                    if common:
                        wit = {"y": y, "v": v, "x0": [ex[a], ex[b]], "colour": min(common)}
                        break
                if wit:
                    break
            if wit:
                break
        if wit:
            break
    out["EXC2"] = _check(wit is None, wit)
    load = exc3_loads(I, phi0, c)
    alpha = max(load, key=lambda a: (load[a], -a), default=None)
    value = load.get(alpha, 0) if alpha is not None else 0
    out["EXC3"] = {"ok": value <= D + 1e-9, "max_colour": alpha, "value": value}
    out["feasible"] = all(out[k]["ok"] for k in ("EXC1", "EXC2", "EXC3"))
    return out


def verify_embedding(I: BlowUpInstance, phi: Mapping[int, int], phi0: Mapping[int, int] | None = None,
                     c: EdgeSetColouring | None = None) -> dict:
    """Check a total map phi: V(H) -> V(G) against every conclusion clause."""
    phi = {int(x): int(v) for x, v in phi.items()}
    phi0 = I.phi0 if phi0 is None else phi0
    c = c or I.c
    H, G = I.H, I.G
    checks: dict[str, dict] = {}
    missing = [x for x in range(H.vertex_count) if x not in phi]
    extra = [x for x in phi if not 0 <= x < H.vertex_count]
    checks["total"] = _check(not missing and not extra, (missing or extra)[:5] or None)
    wit = None
    for i in range(len(H.parts)):
        img = [phi.get(x) for x in H.parts[i]]
        if len(set(img)) != len(img) or set(img) != set(G.parts[i]):
            bad = next((x for x in H.parts[i] if phi.get(x) not in set(G.parts[i])), None)
            wit = {"part": i, "vertex": bad}
            break
    checks["bijection"] = _check(wit is None, wit)
    wit = next(({"x": x, "expected": v, "got": phi.get(x)} for x, v in phi0.items() if phi.get(x) != v), None)
    checks["extends_phi0"] = _check(wit is None, wit)
    wit = None
    for x, y in H.edges:
        u, v = phi.get(x), phi.get(y)
        if u is None or v is None or not G.has_edge(u, v):
            wit = {"edge": [x, y], "image": [u, v]}
            break
    checks["edges"] = _check(wit is None, wit)
    if wit is None and checks["total"]["ok"]:
        ok, pair = is_rainbow((edge_key(phi[x], phi[y]) for x, y in H.edges), c)
        checks["rainbow"] = _check(ok, None if ok else {"edges": [list(pair[0]), list(pair[1])],
                                                        "colours": sorted(c(*pair[0]) & c(*pair[1]))})
    else:
        checks["rainbow"] = _check(False, {"reason": "edge check failed"})
    wit = None
    for i, A in I.A.items():
        for x in H.parts[i]:
            v = phi.get(x)
            if v is None or v not in A._ri or not A.has_edge(x, v):
                wit = {"cluster": i, "x": x, "v": v}
                break
        if wit:
            break
    checks["candidacy"] = _check(wit is None, wit)
    return {"ok": all(ch["ok"] for ch in checks.values()), "checks": checks}


def image_colours(I: BlowUpInstance, phi: Mapping[int, int], c: EdgeSetColouring | None = None) -> set[int]:
    c = c or I.c
    used: set[int] = set()
    for x, y in I.H.edges:
        if x in phi and y in phi:
            used |= c(phi[x], phi[y])
    return used


# JSON

def instance_to_json(I: BlowUpInstance) -> dict:
    cand = {}
    for i, A in I.A.items():
        if A.adj.all():
            cand[str(i)] = "complete"
        else:
            cand[str(i)] = [list(e) for e in A.edges()]
    return {"form": I.form,
            "H": graph_to_json(I.H),
            "G": graph_to_json(I.G, I.c),
            "R": sorted([min(e), max(e)] for e in I.R.edges),
            "candidacy": cand,
            "phi0": sorted([x, v] for x, v in I.phi0.items()),
            "params": {"eps": I.eps, "d": I.d, "mu": I.mu, "delta": I.delta}}


def instance_from_json(obj: Mapping) -> BlowUpInstance:
    try:
        H, _ = graph_from_json(obj["H"])
        G, c = graph_from_json(obj["G"])
        if c is None:
            raise InstanceError("host graph carries no colouring")
        r = G.r
        R = nx.Graph()
        R.add_nodes_from(range(1, r + 1))
        R.add_edges_from((int(a), int(b)) for a, b in obj.get("R", []))
        A = {}
        cand = obj.get("candidacy") or {}
        if H.r != G.r:
            raise InstanceError("H and G have different numbers of parts")
        for i in range(1, r + 1):
            entry = cand.get(str(i), "complete")
            if entry == "complete":
                A[i] = BipartiteGraph.complete(H.parts[i], G.parts[i])
            else:
                A[i] = BipartiteGraph.from_edges(H.parts[i], G.parts[i], [tuple(e) for e in entry])
        p = obj.get("params", {})
        return BlowUpInstance(H, G, R, A, c, eps=float(p.get("eps", 0.1)), d=float(p.get("d", 0.5)),
                              mu=float(p.get("mu", 0.05)), delta=int(p.get("delta", 2)),
                              phi0={int(x): int(v) for x, v in obj.get("phi0", [])},
                              form=obj.get("form", "general"))
    except InstanceError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InstanceError(f"malformed instance JSON: {exc}") from exc


def load_instance(path) -> BlowUpInstance:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"not valid JSON: {exc}") from exc
    return instance_from_json(obj)
