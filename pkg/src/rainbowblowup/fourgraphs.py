"""Triples of bipartite graphs: the common-neighbourhood condition, the graph
A_sigma induced by a perfect matching sigma, and relabelling of candidacy
graphs along bijections between clusters."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import InstanceError
from .graphcore import BipartiteGraph
from .matching import is_perfect_matching
from .regularity import _TOL, test_pair


@dataclass
class RegularTriple:
    G12: BipartiteGraph
    G13: BipartiteGraph
    G23: BipartiteGraph
    d12: float
    d13: float
    d23: float
    eps: float

    def __post_init__(self):
        V1, V2, V3 = self.G12.left, self.G12.right, self.G13.right
        if self.G13.left != V1 or self.G23.left != V2 or self.G23.right != V3:
            raise InstanceError("triple graphs do not share their vertex classes")
        if not len(V1) == len(V2) == len(V3):
            raise InstanceError("triple classes must have equal size")
        if set(V1) & set(V2) or set(V1) & set(V3) or set(V2) & set(V3):
            raise InstanceError("triple classes must be disjoint")

    @property
    def n(self) -> int:
        return len(self.G12.left)


def common_neighbour_counts(G13: BipartiteGraph, G23: BipartiteGraph) -> np.ndarray:
    """Matrix of |N_{G13}(v1) & N_{G23}(v2)| over V1 x V2."""
    return G13.adj.astype(np.int32) @ G23.adj.astype(np.int32).T


def check_triple_regular(T: RegularTriple, mode: str = "auto", trials: int = 2000, seed=None) -> dict:
    """Super-regularity of the three pairs plus the window
    |N_{G13}(v1) & N_{G23}(v2)| = (d13 d23 +- eps) n for every edge v1v2 of G12."""
    out = {"passed": True, "pairs": {}, "window_witness": None}
    for name, G, dd in (("12", T.G12, T.d12), ("13", T.G13, T.d13), ("23", T.G23, T.d23)):
        v = test_pair(G, eps=T.eps, d=dd, flavour="super", mode=mode, trials=trials, seed=seed)
        out["pairs"][name] = v.to_json()
        if not v.passed:
            out["passed"] = False
    common = common_neighbour_counts(T.G13, T.G23)
    bad = T.G12.adj & (np.abs(common - T.d13 * T.d23 * T.n) > T.eps * T.n + _TOL)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        out["passed"] = False
        out["window_witness"] = {"v1": T.G12.left[i], "v2": T.G12.right[j], "common": int(common[i, j]),
                                 "target": T.d13 * T.d23 * T.n, "slack": T.eps * T.n}
    return out


def a_sigma(sigma: Mapping[int, int], G13: BipartiteGraph, G23: BipartiteGraph,
            G12: BipartiteGraph | None = None) -> BipartiteGraph:
    """Edges v1v3 of G13 with sigma(v1)v3 an edge of G23."""
    if G12 is not None and not is_perfect_matching(G12, dict(sigma)):
        raise InstanceError("sigma is not a perfect matching of G12")
    if set(sigma) != set(G13.left) or set(sigma.values()) != set(G23.left):
        raise InstanceError("sigma must be a bijection from V1 onto V2")
    if G13.right != G23.right:
        raise InstanceError("G13 and G23 must share the third class")
    rows = [G23.lindex(sigma[v1]) for v1 in G13.left]
    return G13.with_adj(G13.adj & G23.adj[rows])


def project_candidacy(A: BipartiteGraph, pi: Mapping[int, int]) -> BipartiteGraph:
    """Relabel the left side of A along the bijection pi (xv -> pi(x)v).

    The result lists its left vertices in increasing order.
    """
    if set(pi) != set(A.left) or len(set(pi.values())) != len(pi):
        raise InstanceError("pi must be a bijection defined on the left side of A")
    new_left = sorted(pi.values())
    src = {pi[x]: A.lindex(x) for x in A.left}
    return BipartiteGraph(new_left, A.right, A.adj[[src[y] for y in new_left]])
