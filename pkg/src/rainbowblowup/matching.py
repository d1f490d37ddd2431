"""Perfect matchings of bipartite graphs: enumeration, switchings, uniform
sampling, conflict systems and conflict-free sampling.

A perfect matching is a dict mapping every left vertex to a right vertex.

The switch chain moves from M by picking a matching edge e = a1b1 and an edge
ab of G uniformly at random; if ab is (e, M)-switchable, that is a1b2 and a2b1
are edges where a2b, ab2 are in M, it replaces a1b1, a2b, ab2 by ab, a1b2, a2b1
(only two edges change when ab meets e).  Every move has the same proposal
probability as its reverse, so the uniform distribution is stationary.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import BudgetExhausted, InstanceError
from .graphcore import BipartiteGraph, Edge
from .rng import SeedLike, make_rng

PerfectMatching = dict
ENUM_CAP = 12
ENUM_LIMIT = 5000


def maximum_matching(B: BipartiteGraph) -> dict[int, int]:
    """Maximum matching as a dict left -> right (augmenting paths via scipy)."""
    n1, n2 = B.shape
    if n1 == 0 or n2 == 0:
        return {}
    m = maximum_bipartite_matching(csr_matrix(B.adj.astype(np.int8)), perm_type="column")
    return {B.left[i]: B.right[j] for i, j in enumerate(m.tolist()) if j >= 0}


def hall_violator(B: BipartiteGraph, M: dict[int, int] | None = None) -> list[int] | None:
    """A left set S with |N(S)| < |S|, or None if a left-saturating matching exists."""
    if M is None:
        M = maximum_matching(B)
    free = [a for a in B.left if a not in M]
    if not free:
        return None
    inv = {b: a for a, b in M.items()}
    S, seen_b = {free[0]}, set()
    stack = [free[0]]
    while stack:
        a = stack.pop()
        for b in B.neighbours_of_left(a):
            if b in seen_b:
                continue
            seen_b.add(b)
            a2 = inv.get(b)
            if a2 is not None and a2 not in S:
                S.add(a2)
                stack.append(a2)
    return sorted(S)


def has_perfect_matching(B: BipartiteGraph) -> bool:
    n1, n2 = B.shape
    return n1 == n2 and len(maximum_matching(B)) == n1


def is_perfect_matching(B: BipartiteGraph, M: dict[int, int]) -> bool:
    if set(M) != set(B.left) or len(set(M.values())) != len(M) or set(M.values()) != set(B.right):
        return False
    return all(B.has_edge(a, b) for a, b in M.items())


def enumerate_perfect_matchings(B: BipartiteGraph, cap: int = ENUM_CAP,
                                limit: int | None = None) -> list[dict[int, int]]:
    """All perfect matchings, in lexicographic order of the right-index tuples."""
    n1, n2 = B.shape
    if n1 != n2:
        raise InstanceError("sides differ in size")
    if n1 > cap:
        raise InstanceError(f"enumeration limited to sides of size <= {cap}")
    nbrs = [np.flatnonzero(B.adj[i]).tolist() for i in range(n1)]
    out: list[dict[int, int]] = []
    used = [False] * n2
    cur = [0] * n1

    def rec(i):
        if i == n1:
            out.append({B.left[k]: B.right[cur[k]] for k in range(n1)})
            if limit is not None and len(out) > limit:
                raise OverflowError
            return
        for j in nbrs[i]:
            if not used[j]:
                used[j] = True
                cur[i] = j
                rec(i + 1)
                used[j] = False

    rec(0)
    return out


def count_switchable(B: BipartiteGraph, M: dict[int, int], e: Edge) -> tuple[int, list[Edge]]:
    """Edges ab outside M with a1b2, a2b1 in G, where e = a1b1 and a2b, ab2 in M."""
    a1, b1 = e
    if M.get(a1) != b1:
        raise InstanceError(f"{e} is not a matching edge")
    inv = {b: a for a, b in M.items()}
    out = []
    for a, b in B.edges():
        if M[a] == b:
            continue
        b2, a2 = M[a], inv[b]
        if B.has_edge(a1, b2) and B.has_edge(a2, b1):
            out.append((a, b))
    return len(out), out


def apply_switch(M: dict[int, int], e: Edge, f: Edge) -> dict[int, int]:
    """The matching obtained by switching e out for the switchable edge f."""
    a1, b1 = e
    a, b = f
    inv = {y: x for x, y in M.items()}
    b2, a2 = M[a], inv[b]
    out = dict(M)
    if a == a1:
        out[a1], out[a2] = b, b1
    elif b == b1:
        out[a], out[a1] = b1, b2
    else:
        out[a], out[a1], out[a2] = b, b2, b1
    return out


class SwitchChain:
    """Single switch chain on index-level state (pure Python for speed)."""

    def __init__(self, B: BipartiteGraph, rng: np.random.Generator, start: dict[int, int] | None = None):
        self.B = B
        n = B.shape[0]
        self.n = n
        self.adj = [set(np.flatnonzero(B.adj[i]).tolist()) for i in range(n)]
        I, J = np.nonzero(B.adj)
        self.EI, self.EJ = I.tolist(), J.tolist()
        if start is None:
            start = maximum_matching(B)
            if len(start) != n or B.shape[0] != B.shape[1]:
                raise InstanceError("graph has no perfect matching")
        self.m = [B.rindex(start[a]) for a in B.left]
        self.minv = [0] * n
        for i, j in enumerate(self.m):
            self.minv[j] = i
        self.rng = rng
        self.steps = 0
        self.moves = 0

    def run(self, steps: int) -> None:
        if steps <= 0 or not self.EI:
            return
        n, E = self.n, len(self.EI)
        A1 = self.rng.integers(n, size=steps).tolist()
        K = self.rng.integers(E, size=steps).tolist()
        m, minv, adj, EI, EJ = self.m, self.minv, self.adj, self.EI, self.EJ
        moves = 0
        for a1, k in zip(A1, K):
            a, b = EI[k], EJ[k]
            b2 = m[a]
            if b2 == b:
                continue
            b1 = m[a1]
            a2 = minv[b]
            if b2 not in adj[a1] or b1 not in adj[a2]:
                continue
            if a == a1:
                m[a1] = b; minv[b] = a1
                m[a2] = b1; minv[b1] = a2
            elif b == b1:
                m[a] = b1; minv[b1] = a
                m[a1] = b2; minv[b2] = a1
            else:
                m[a] = b; minv[b] = a
                m[a1] = b2; minv[b2] = a1
                m[a2] = b1; minv[b1] = a2
            moves += 1
        self.steps += steps
        self.moves += moves

    def state(self) -> dict[int, int]:
        L, R = self.B.left, self.B.right
        return {L[i]: R[j] for i, j in enumerate(self.m)}


def run_parallel_chains(B: BipartiteGraph, count: int, steps: int, seed: SeedLike = None) -> np.ndarray:
    """Run ``count`` independent switch chains in lockstep (vectorised).

    Returns a (count, n) array of right indices: row k is chain k's matching
    after ``steps`` moves from the common start.
    """
    n1, n2 = B.shape
    start = maximum_matching(B)
    if n1 != n2 or len(start) != n1:
        raise InstanceError("graph has no perfect matching")
    rng = make_rng(seed)
    adj = B.adj
    I, J = np.nonzero(adj)
    E = len(I)
    m = np.tile(np.array([B.rindex(start[a]) for a in B.left]), (count, 1))
    minv = np.empty_like(m)
    rows = np.arange(count)
    minv[rows[:, None], m] = np.arange(n1)[None, :]
    for _ in range(steps):
        a1 = rng.integers(n1, size=count)
        k = rng.integers(E, size=count)
        a, b = I[k], J[k]
        b1 = m[rows, a1]
        b2 = m[rows, a]
        a2 = minv[rows, b]
        ok = (b2 != b) & adj[a1, b2] & adj[a2, b1]
        c1 = ok & (a == a1)
        c2 = ok & (b == b1)
        c3 = ok & ~c1 & ~c2
        r = rows[c1]
        m[r, a1[c1]] = b[c1]; minv[r, b[c1]] = a1[c1]
        m[r, a2[c1]] = b1[c1]; minv[r, b1[c1]] = a2[c1]
        r = rows[c2]
        m[r, a[c2]] = b1[c2]; minv[r, b1[c2]] = a[c2]
        m[r, a1[c2]] = b2[c2]; minv[r, b2[c2]] = a1[c2]
        r = rows[c3]
        m[r, a[c3]] = b[c3]; minv[r, b[c3]] = a[c3]
        m[r, a1[c3]] = b2[c3]; minv[r, b2[c3]] = a1[c3]
        m[r, a2[c3]] = b1[c3]; minv[r, b1[c3]] = a2[c3]
    return m


class PMSampler:
    """Repeated uniform perfect-matching draws from one bipartite graph.

    ``exact`` draws from the enumerated list; ``chain`` runs the switch chain
    for ``burn_in`` steps before the first draw and ``thin`` steps between
    later draws; ``auto`` enumerates when there are at most ``enum_limit``
    matchings on sides of size <= 12 and otherwise uses the chain.
    """

    def __init__(self, B: BipartiteGraph, seed: SeedLike = None, mode: str = "auto",
                 burn_in: int | None = None, thin: int | None = None, enum_limit: int = ENUM_LIMIT):
        n1, n2 = B.shape
        if n1 != n2:
            raise InstanceError("sides differ in size")
        self.B = B
        self.rng = make_rng(seed)
        M = maximum_matching(B)
        if len(M) != n1:
            raise InstanceError(f"no perfect matching; Hall violator {hall_violator(B, M)}")
        self.mode = mode
        self._list = None
        if mode in ("auto", "exact"):
            try:
                if n1 > ENUM_CAP:
                    raise OverflowError
                self._list = enumerate_perfect_matchings(B, limit=None if mode == "exact" else enum_limit)
                self.mode = "exact"
            except OverflowError:
                if mode == "exact":
                    raise InstanceError("too many perfect matchings for exact mode") from None
                self.mode = "chain"
        if self.mode == "chain":
            self.burn_in = 40 * B.edge_count if burn_in is None else burn_in
            self.thin = self.burn_in if thin is None else thin
            self.chain = SwitchChain(B, self.rng, M)
            self._fresh = True

    def draw(self) -> dict[int, int]:
        if self.mode == "exact":
            return dict(self._list[int(self.rng.integers(len(self._list)))])
        self.chain.run(self.burn_in if self._fresh else self.thin)
        self._fresh = False
        return self.chain.state()


def sample_uniform_pm(B: BipartiteGraph, seed: SeedLike = None, mode: str = "auto",
                      burn_in: int | None = None) -> dict[int, int]:
    if B.shape[0] == 0 and B.shape[1] == 0:
        return {}
    return PMSampler(B, seed, mode, burn_in).draw()


class ConflictSystem:
    """Unordered pairs of edges that may not both appear in a matching."""

    def __init__(self, pairs: Iterable[tuple[Edge, Edge]] = ()):
        self.partners: dict[Edge, set[Edge]] = defaultdict(set)
        self.pairs: set[frozenset] = set()
        for e, f in pairs:
            e, f = tuple(e), tuple(f)
            if e == f:
                raise InstanceError("an edge cannot conflict with itself")
            key = frozenset((e, f))
            if key in self.pairs:
                continue
            self.pairs.add(key)
            self.partners[e].add(f)
            self.partners[f].add(e)

    def __len__(self) -> int:
        return len(self.pairs)

    def count(self, e: Edge) -> int:
        return len(self.partners.get(tuple(e), ()))

    @property
    def k(self) -> int:
        return max((len(p) for p in self.partners.values()), default=0)

    def conflicts_in(self, M: dict) -> list[tuple[Edge, Edge]]:
        chosen = set(M.items())
        out = []
        for e in chosen:
            for f in self.partners.get(e, ()):
                if f in chosen and e < f:
                    out.append((e, f))
        return out

    def is_conflict_free(self, M: dict) -> bool:
        for e in M.items():
            ps = self.partners.get(e)
            if ps and any(M.get(f[0]) == f[1] for f in ps):
                return False
        return True

    def to_json(self) -> dict:
        edges = sorted({e for p in self.pairs for e in p})
        idx = {e: i for i, e in enumerate(edges)}
        return {"edges": [list(e) for e in edges],
                "pairs": sorted(sorted(idx[e] for e in p) for p in self.pairs)}


def _as_blocks(B) -> list[BipartiteGraph]:
    if isinstance(B, BipartiteGraph):
        return [B]
    return list(B)


def sample_conflict_free_pm(B, F: ConflictSystem, seed: SeedLike = None, max_attempts: int = 1000,
                            mode: str = "auto", burn_in: int | None = None,
                            thin: int | None = None) -> tuple[dict[int, int], int]:
    """Rejection sampling: draw uniform perfect matchings until one is conflict-free.

    ``B`` may be a list of vertex-disjoint bipartite graphs, in which case a
    perfect matching of their union (an independent uniform draw per block)
    is sampled.  Returns the matching and the number of attempts used.
    """
    rng = make_rng(seed)
    samplers = [PMSampler(b, rng, mode, burn_in, thin) for b in _as_blocks(B) if b.shape[0]]
    for attempt in range(1, max_attempts + 1):
        M: dict[int, int] = {}
        for s in samplers:
            M.update(s.draw())
        if F.is_conflict_free(M):
            return M, attempt
    raise BudgetExhausted(f"no conflict-free perfect matching in {max_attempts} attempts",
                          {"attempts": max_attempts, "conflicts": len(F)})


def covering_conflict_free_matching(X_parts: Sequence[Sequence[int]], V_parts: Sequence[Sequence[int]],
                                    edges: Iterable[Edge], F: ConflictSystem,
                                    min_degree_check: tuple[float, int, int] | None = None,
                                    seed: SeedLike = None, max_attempts: int = 1000,
                                    mode: str = "auto", burn_in: int | None = None,
                                    thin: int | None = None) -> dict[int, int]:
    """Conflict-free matching covering every X vertex, each x in X_i going to V_i.

    Pads X_i with |V_i| - |X_i| new vertices joined to all of V_i, samples a
    conflict-free perfect matching of the padded graph and drops the padding.
    Padding vertices get negative labels so they never clash with real ones.
    """
    edges = list(edges)
    nb: dict[int, list[int]] = defaultdict(list)
    for x, v in edges:
        nb[x].append(v)
    if min_degree_check is not None:
        d, n, r = min_degree_check
        for Xi in X_parts:
            for x in Xi:
                if len(nb[x]) < d * n / r - 1e-9:
                    raise InstanceError(f"vertex {x} has degree {len(nb[x])} < dn/r = {d * n / r:.2f}")
    blocks = []
    pad = -1
    for Xi, Vi in zip(X_parts, V_parts):
        if len(Xi) > len(Vi):
            raise InstanceError("a part of X is larger than its V part")
        Xi = list(Xi)
        extra = []
        for _ in range(len(Vi) - len(Xi)):
            extra.append(pad)
            pad -= 1
        B = BipartiteGraph(Xi + extra, Vi)
        for x in Xi:
            for v in nb[x]:
                if B._ri.get(v) is None:
                    raise InstanceError(f"edge {(x, v)} leaves its part")
                B.adj[B.lindex(x), B.rindex(v)] = True
        B.adj[len(Xi):, :] = True
        blocks.append(B)
    if not blocks:
        return {}
    M, _ = sample_conflict_free_pm(blocks, F, seed, max_attempts, mode, burn_in, thin)
    return {x: v for x, v in M.items() if x >= 0}
