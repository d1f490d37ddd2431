"""Random colour partitions, the partial resampling algorithm (PRA) and the
degree-splitting pipeline that separates colours across cluster pairs.

Variables of the PRA are colours i with values j in range(t) (the class a
colour is sent to).  An element is a pair (i, j); an atomic event is a set of
elements with at most one value per variable.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import BudgetExhausted, InstanceError
from .graphcore import BipartiteGraph, EdgeSetColouring, PartitionedGraph, edge_key
from .regularity import RegularityVerdict, test_pair
from .rng import SeedLike, derive, make_rng

Element = tuple[int, int]


def atomic_event(elements: Iterable[Element]) -> frozenset[Element]:
    """Validate and freeze a set of elements (one value per variable)."""
    Y = frozenset((int(i), int(j)) for i, j in elements)
    if len({i for i, _ in Y}) != len(Y):
        raise InstanceError("atomic event assigns two values to one variable")
    return Y


def simplex_vectors(t: int, delta: int) -> list[tuple[int, ...]]:
    """All s in Z_{>=0}^t with sum delta, in lexicographic order."""
    out = []

    def rec(prefix, left, slots):
        if slots == 1:
            out.append(tuple(prefix + [left]))
            return
        for a in range(left, -1, -1):
            rec(prefix + [a], left - a, slots - 1)

    rec([], delta, t)
    return sorted(out)


def multinomial(delta: int, s: Sequence[int]) -> int:
    if sum(s) != delta or min(s) < 0:
        raise InstanceError(f"{s} is not in the simplex of size {delta}")
    out = math.factorial(delta)
    for a in s:
        out //= math.factorial(a)
    return out


def type_of(values: Iterable[int], t: int) -> tuple[int, ...]:
    s = [0] * t
    for j in values:
        s[j] += 1
    return tuple(s)


def random_colour_partition(C: Iterable[int], t: int, probabilities: Sequence[float] | None = None,
                            seed: SeedLike = None) -> list[set[int]]:
    """Send each colour independently to one of t classes."""
    if t < 1:
        raise InstanceError("t must be at least 1")
    C = sorted(C)
    if probabilities is None:
        probabilities = [1.0 / t] * t
    probabilities = np.asarray(probabilities, dtype=float)
    if len(probabilities) != t or (probabilities < 0).any() or abs(probabilities.sum() - 1) > 1e-9:
        raise InstanceError("probabilities must be t non-negative numbers summing to 1")
    rng = make_rng(seed)
    idx = rng.choice(t, size=len(C), p=probabilities) if C else []
    classes = [set() for _ in range(t)]
    for a, j in zip(C, idx):
        classes[int(j)].add(a)
    return classes


# fractional hitting sets

class FractionalHittingSet:
    """Weight function Q on atomic events, given by its (finite) support."""

    def support(self) -> Iterator[tuple[frozenset, float]]:
        raise NotImplementedError

    def weight(self, Y: frozenset) -> float:
        for Z, q in self.support():
            if Z == Y:
                return q
        return 0.0

    def support_within(self, assignment: Sequence[int]) -> list[tuple[frozenset, float]]:
        """Support events Y contained in the full assignment."""
        return [(Y, q) for Y, q in self.support() if all(assignment[i] == j for i, j in Y)]


class ExplicitHittingSet(FractionalHittingSet):
    def __init__(self, weights: Mapping[Iterable[Element], float]):
        self.weights = {atomic_event(Y): float(q) for Y, q in weights.items() if q}
        if frozenset() in self.weights:
            raise InstanceError("Q(empty set) must be 0")

    def support(self):
        return iter(self.weights.items())

    def weight(self, Y):
        return self.weights.get(frozenset(Y), 0.0)


class DegreeHittingSet(FractionalHittingSet):
    """Q_{v,s}(Y) = d_I(v) / (binom(Delta, s) t^-Delta d(v) + 2^Delta kappa n)
    for Y of type (I, s), where d_I(v) counts edges at v with colour set I."""

    def __init__(self, colour_sets: Iterable[Iterable[int]], s: Sequence[int], t: int, kappa: float, n: float):
        sets = [tuple(sorted(I)) for I in colour_sets]
        if not sets:
            raise InstanceError("isolated vertex has no degree hitting set")
        deltas = {len(I) for I in sets}
        if len(deltas) != 1:
            raise InstanceError("degree hitting sets need a uniform colouring")
        self.delta = deltas.pop()
        self.s = tuple(s)
        self.t = t
        if len(self.s) != t or sum(self.s) != self.delta:
            raise InstanceError("s must lie in the simplex S_Delta^t")
        self.dI = Counter(sets)
        self.degree = len(sets)
        self.denominator = (multinomial(self.delta, self.s) * t ** (-self.delta) * self.degree
                            + 2 ** self.delta * kappa * n)

    def threshold(self) -> float:
        return self.denominator

    def support(self):
        for I, cnt in sorted(self.dI.items()):
            q = cnt / self.denominator
            for vals in product(range(self.t), repeat=len(I)):
                if type_of(vals, self.t) == self.s:
                    yield frozenset(zip(I, vals)), q

    def weight(self, Y):
        I = tuple(sorted(i for i, _ in Y))
        if I not in self.dI:
            return 0.0
        if type_of((j for _, j in Y), self.t) != self.s:
            return 0.0
        return self.dI[I] / self.denominator

    def support_within(self, assignment):
        out = []
        for I, cnt in sorted(self.dI.items()):
            vals = [assignment[i] for i in I]
            if type_of(vals, self.t) == self.s:
                out.append((frozenset(zip(I, vals)), cnt / self.denominator))
        return out


def build_degree_hitting_set(G: PartitionedGraph, c: EdgeSetColouring, v: int, s: Sequence[int],
                             t: int, kappa: float, n: float) -> DegreeHittingSet:
    if G.degree(v) == 0:
        raise InstanceError(f"vertex {v} is isolated")
    return DegreeHittingSet([c(v, w) for w in G.neighbours(v)], s, t, kappa, n)


def _lam(lam, i, j) -> float:
    if callable(lam):
        return lam(i, j)
    if isinstance(lam, Mapping):
        return lam[(i, j)]
    if np.ndim(lam) == 0:
        return float(lam)
    return float(lam[i][j])


def gamma_values(Q: FractionalHittingSet, lam, i: int | None = None) -> float:
    """Gamma(Q, lambda) = sum_Y Q(Y) prod_{(i,j) in Y} lambda_{i,j}; restricted to
    events touching variable i when i is given."""
    total = 0.0
    for Y, q in Q.support():
        if i is not None and all(a != i for a, _ in Y):
            continue
        p = q
        for a, j in Y:
            p *= _lam(lam, a, j)
        total += p
    return total


# partial resampling algorithm

@dataclass
class BadEvent:
    predicate: Callable[[Sequence[int]], bool]
    hitting_set: FractionalHittingSet
    label: object = None


@dataclass
class PRAResult:
    assignment: list[int]
    resamples: int
    trace: list = field(default_factory=list)


def _draw_value(rng, probs_i):
    return int(rng.choice(len(probs_i), p=probs_i))


def pra_run(probabilities: Sequence[Sequence[float]], bad_events: Sequence[BadEvent], seed: SeedLike = None,
            max_resamples: int = 100_000, monitor=None, keep_trace: bool = False) -> PRAResult:
    """Run the PRA: while some bad event holds, pick Y inside its assignment with
    probability proportional to Q(Y) and resample the variables of Y.

    ``probabilities[i]`` is the distribution of variable i over its domain.
    Bad events are scanned in list order.  An optional ``monitor`` (see
    DegreeMonitor) may maintain the truth values incrementally; the final
    assignment is always re-checked against every predicate.
    """
    rng = make_rng(seed)
    probs = [np.asarray(p, dtype=float) for p in probabilities]
    A = [_draw_value(rng, p) for p in probs]
    uniform = {i for i, p in enumerate(probs) if np.allclose(p, p[0])}
    if monitor is not None:
        monitor.reset(A)
    trace = []
    resamples = 0
    while True:
        if monitor is not None:
            k = monitor.first_true()
        else:
            k = next((idx for idx, ev in enumerate(bad_events) if ev.predicate(A)), None)
        if k is None:
            break
        if resamples >= max_resamples:
            raise BudgetExhausted(f"PRA exceeded {max_resamples} resamplings",
                                  {"resamples": resamples, "event": bad_events[k].label})
        supp = bad_events[k].hitting_set.support_within(A)
        if not supp:
            raise InstanceError(f"hitting set of event {bad_events[k].label} is empty on a true assignment")
        w = np.array([q for _, q in supp])
        Y = supp[int(rng.choice(len(supp), p=w / w.sum()))][0]
        changed = []
        for i, _ in Y:
            old = A[i]
            A[i] = int(rng.integers(len(probs[i]))) if i in uniform else _draw_value(rng, probs[i])
            if A[i] != old:
                changed.append((i, old))
        resamples += 1
        if keep_trace:
            trace.append((bad_events[k].label, sorted(i for i, _ in Y)))
        if monitor is not None and changed:
            monitor.update(changed, A)
    for ev in bad_events:
        if ev.predicate(A):
            raise AssertionError(f"PRA returned an assignment where {ev.label} holds")
    return PRAResult(A, resamples, trace)


# degree splitting

@dataclass
class DegreeUnit:
    """A vertex (or a vertex restricted to one part of its neighbourhood)."""
    label: object
    colour_sets: list[tuple[int, ...]]


def _units(G: PartitionedGraph, c: EdgeSetColouring, neighbourhood_partitions) -> list[DegreeUnit]:
    units = []
    for v in range(G.vertex_count):
        if neighbourhood_partitions is None:
            nb = sorted(G.neighbours(v))
            if nb:
                units.append(DegreeUnit(v, [tuple(sorted(c(v, w))) for w in nb]))
            continue
        for key, S in neighbourhood_partitions.get(v, {}).items():
            S = sorted(S)
            if any(not G.has_edge(v, w) for w in S):
                raise InstanceError(f"neighbourhood part of {v} contains a non-neighbour")
            if S:
                units.append(DegreeUnit((v, key), [tuple(sorted(c(v, w))) for w in S]))
    return units


class DegreeMonitor:
    """Incremental counts d_{s,u} for every unit u and every s."""

    def __init__(self, units: list[DegreeUnit], t: int, delta: int, thresholds: np.ndarray,
                 s_index: dict[tuple[int, ...], int]):
        self.units, self.t, self.delta = units, t, delta
        self.thr = thresholds  # (num_units, num_s)
        self.s_index = s_index
        self.by_colour: dict[int, list[tuple[int, int]]] = defaultdict(list)
        for u, unit in enumerate(units):
            for k, I in enumerate(unit.colour_sets):
                for a in I:
                    self.by_colour[a].append((u, k))

    def _type(self, I, A) -> int:
        return self.s_index[type_of((A[a] for a in I), self.t)]

    def reset(self, A):
        self.cnt = np.zeros(self.thr.shape, dtype=np.int64)
        self.etype = []
        for u, unit in enumerate(self.units):
            ts = [self._type(I, A) for I in unit.colour_sets]
            self.etype.append(ts)
            for s in ts:
                self.cnt[u, s] += 1
        bad = np.argwhere(self.cnt >= self.thr - 1e-12)
        self.violated = {(int(u), int(s)) for u, s in bad}

    def update(self, changed, A):
        touched = set()
        for a, _ in changed:
            for u, k in self.by_colour.get(a, ()):
                touched.add((u, k))
        for u, k in touched:
            old = self.etype[u][k]
            new = self._type(self.units[u].colour_sets[k], A)
            if old != new:
                self.etype[u][k] = new
                for s, dlt in ((old, -1), (new, 1)):
                    self.cnt[u, s] += dlt
                    if self.cnt[u, s] >= self.thr[u, s] - 1e-12:
                        self.violated.add((u, s))
                    else:
                        self.violated.discard((u, s))

    def first_true(self):
        if not self.violated:
            return None
        u, s = min(self.violated)
        return u * self.thr.shape[1] + s


@dataclass
class SplitResult:
    classes: list[set[int]]
    strategy: str
    attempts: int
    resamples: int
    max_deviation: float
    window: float
    kappa: float
    lambda_sum: float | None = None
    counts: np.ndarray | None = None
    units: list = field(default_factory=list)


def default_kappa(t: int, delta: int, d: float, mu: float) -> float:
    return 4 * math.sqrt(t ** delta * mu / d)


def _counts(units, A_of, t, delta, s_index):
    cnt = np.zeros((len(units), len(s_index)), dtype=np.int64)
    for u, unit in enumerate(units):
        for I in unit.colour_sets:
            cnt[u, s_index[type_of((A_of[a] for a in I), t)]] += 1
    return cnt


def degree_split(G: PartitionedGraph, c: EdgeSetColouring, t: int, kappa: float, seed: SeedLike = None,
                 strategy: str = "pra", neighbourhood_partitions: Mapping | None = None,
                 n: float | None = None, max_attempts: int = 200,
                 max_resamples: int = 200_000) -> SplitResult:
    """Partition the colours into t classes so that every unit u and every s
    has d_{s,u} = binom(Delta, s) t^-Delta d(u) +- (2t)^Delta kappa n.

    Units are the vertices of G, or the pairs (v, key) for the given
    neighbourhood partitions {v: {key: S}} (vertex splitting).  ``n`` defaults
    to the number of units.  ``retry`` redraws plain random partitions,
    ``pra`` runs the partial resampling algorithm on the upper-tail events.
    """
    if not 0 < kappa < 1:
        raise InstanceError("kappa must lie in (0,1)")
    if t < 1:
        raise InstanceError("t must be at least 1")
    units = _units(G, c, neighbourhood_partitions)
    deltas = {len(I) for u in units for I in u.colour_sets}
    if len(deltas) > 1:
        raise InstanceError("degree_split needs a uniform colouring (pad first)")
    delta = deltas.pop() if deltas else 1
    if n is None:
        n = max(len(units), 1)
    S = simplex_vectors(t, delta)
    s_index = {s: k for k, s in enumerate(S)}
    coef = np.array([multinomial(delta, s) * t ** (-delta) for s in S])
    deg = np.array([len(u.colour_sets) for u in units], dtype=float)
    mean = deg[:, None] * coef[None, :]
    window = (2 * t) ** delta * kappa * n
    N = c.universe
    rng = make_rng(seed)

    def finish(A, strat, attempts, resamples, lam_sum=None):
        cnt = _counts(units, A, t, delta, s_index)
        if (cnt.sum(1) != deg).any():
            raise AssertionError("degree identity violated")
        dev = float(np.abs(cnt - mean).max()) if len(units) else 0.0
        classes = [set() for _ in range(t)]
        for a in range(N):
            classes[A[a]].add(a)
        return SplitResult(classes, strat, attempts, resamples, dev, window, kappa, lam_sum, cnt,
                           [u.label for u in units])

    if t == 1:
        return finish([0] * N, strategy, 1, 0)

    if strategy == "retry":
        for attempt in range(1, max_attempts + 1):
            A = rng.integers(t, size=N).tolist()
            cnt = _counts(units, A, t, delta, s_index)
            if len(units) == 0 or np.abs(cnt - mean).max() <= window + 1e-9:
                return finish(A, "retry", attempt, 0)
        raise BudgetExhausted("degree_split(retry): no partition met the windows",
                              {"attempts": max_attempts, "window": window})
    if strategy != "pra":
        raise ValueError(f"unknown strategy {strategy!r}")

    thr = mean + 2 ** delta * kappa * n
    events = []
    for u, unit in enumerate(units):
        for s in S:
            Q = DegreeHittingSet(unit.colour_sets, s, t, kappa, n)
            k = s_index[s]
            events.append(BadEvent(_degree_predicate(unit.colour_sets, s, t, thr[u, k]), Q, (unit.label, s)))
    monitor = DegreeMonitor(units, t, delta, thr, s_index)
    probs = [np.full(t, 1.0 / t)] * N
    res = pra_run(probs, events, rng, max_resamples, monitor)
    lam_sum = N * t * (1 + kappa) / t
    out = finish(res.assignment, "pra", 1, res.resamples, lam_sum)
    if out.max_deviation > window + 1e-9:
        raise AssertionError("PRA output violates a degree window")
    return out


def _degree_predicate(colour_sets, s, t, threshold):
    def pred(A):
        return sum(1 for I in colour_sets if type_of((A[a] for a in I), t) == s) >= threshold - 1e-12
    return pred


# dummy colours and colour separation

def pad_to_uniform(G: PartitionedGraph, c: EdgeSetColouring, delta_target: int, dummy_bound: int,
                   seed: SeedLike = None, max_dummies: int | None = None,
                   edges: Iterable | None = None) -> EdgeSetColouring:
    """Add dummy colours so that every edge carries exactly delta_target colours.

    Dummies get ids c.universe, c.universe + 1, ... and are dealt round-robin
    over the (shuffled) edges, so each is used at most ``dummy_bound`` times
    and no edge receives the same dummy twice.
    """
    if dummy_bound < 1:
        raise InstanceError("dummy_bound must be at least 1")
    edges = list(G.edges if edges is None else (edge_key(*e) for e in edges))
    need = []
    for e in edges:
        cs = c.assignment.get(e, frozenset())
        if len(cs) > delta_target:
            raise InstanceError(f"edge {e} already has {len(cs)} > {delta_target} colours")
        need.append(delta_target - len(cs))
    slots = sum(need)
    if slots == 0:
        return EdgeSetColouring(c.universe, {e: c.assignment[e] for e in edges})
    n_dummy = max(math.ceil(slots / dummy_bound), delta_target)
    if max_dummies is not None and n_dummy > max_dummies:
        raise InstanceError(f"{n_dummy} dummy colours needed, only {max_dummies} allowed")
    rng = make_rng(seed)
    order = rng.permutation(len(edges)).tolist()
    used = [0] * n_dummy
    ptr = 0
    out = {}
    for k in order:
        e = edges[k]
        cs = set(c.assignment.get(e, ()))
        for _ in range(need[k]):
            # next dummy with spare capacity not already on this edge
            for _ in range(n_dummy):
                a = ptr % n_dummy
                ptr += 1
                if used[a] < dummy_bound and c.universe + a not in cs:
                    break
            else:
                raise AssertionError("round-robin dummy assignment failed")
            used[a] += 1
            cs.add(c.universe + a)
        out[e] = cs
    return EdgeSetColouring(c.universe + n_dummy, out)


def sliced_regularity_check(G: PartitionedGraph, pair: tuple[Sequence[int], Sequence[int]],
                            c: EdgeSetColouring, allowed: Iterable[int], eps: float, d: float, p: float,
                            delta_c: int, flavour: str = "lower-super", mode: str = "auto",
                            trials: int = 2000, seed: SeedLike = None) -> RegularityVerdict:
    """Test G_{C'}[V, V'] against (2 eps, p^Delta d) in the given flavour."""
    V, W = list(pair[0]), list(pair[1])
    allowed = frozenset(allowed)
    M = G.bipartite_matrix(V, W)
    I, J = np.nonzero(M)
    for i, j in zip(I.tolist(), J.tolist()):
        if not c(V[i], W[j]) <= allowed:
            M[i, j] = False
    return test_pair(BipartiteGraph(V, W, M), eps=2 * eps, d=p ** delta_c * d, flavour=flavour,
                     mode=mode, trials=trials, seed=seed)


@dataclass
class SeparationResult:
    classes: list[set[int]]                 # real colours, C_l = C & C_l*
    padded_classes: list[set[int]]          # C_l* including dummies
    subgraphs: dict[tuple[int, int, int], BipartiteGraph]  # (l, i, j) -> G_l^{ij}
    verdicts: dict[tuple[int, int, int], dict]
    attempts: int
    split: SplitResult | None
    padded: EdgeSetColouring | None
    failures: Counter = field(default_factory=Counter)


def separate_colours(G: PartitionedGraph, parts: Sequence[Sequence[int]], R: nx.Graph, R_S: Iterable,
                     c: EdgeSetColouring, t: int, mu: float, eps: float, d: float, delta_c: int,
                     seed: SeedLike = None, lower: bool = True, strategy: str = "retry",
                     kappa: float | None = None, max_attempts: int = 50,
                     slices: Mapping[tuple[int, int], Iterable[int]] | None = None,
                     mode: str = "auto", trials: int = 2000) -> SeparationResult:
    """Split the colours into t classes so that every R-pair stays (lower)
    (2 eps, d / t^Delta)-regular inside every class, and super-regular on R_S.

    Pipeline: pad to a uniform colouring with dummy colours, split degrees
    (per R_S-neighbourhood), test every requested slice, strip the dummies.
    ``slices`` optionally restricts which classes l are tested and returned
    for each pair (default: all classes for all pairs).
    """
    R_S = {tuple(sorted(e)) for e in R_S}
    pairs = sorted(tuple(sorted(e)) for e in R.edges)
    rs = [e for e in R_S if e not in pairs]
    if rs:
        raise InstanceError(f"R_S edges {rs} are not in R")
    real = set(range(c.universe))
    flav = lambda ij: ("lower-super" if lower else "super") if ij in R_S else ("lower-regular" if lower else "regular")

    def want(ij):
        if slices is None:
            return range(t)
        return slices.get(ij, slices.get(ij[::-1], ()))

    if t == 1:
        subs, verdicts = {}, {}
        for i, j in pairs:
            B = BipartiteGraph.from_graph(G, list(parts[i]), list(parts[j]))
            subs[(0, i, j)] = B
            verdicts[(0, i, j)] = test_pair(B, eps=eps, d=d, flavour=flav((i, j)), mode=mode,
                                            trials=trials, seed=derive(seed, "t1", i, j)).to_json()
        return SeparationResult([set(real)], [set(real)], subs, verdicts, 1, None, None)

    n = sum(len(parts[i]) for i in R.nodes)
    pair_edges = [e for i, j in pairs for e in _pair_edges(G, parts[i], parts[j])]
    padded = pad_to_uniform(G, c, delta_c, max(1, int(mu * n)), derive(seed, "pad"), edges=pair_edges)
    Gp = G.with_edges(pair_edges)
    nbhd: dict[int, dict[int, set[int]]] = defaultdict(dict)
    for i, j in R_S:
        for a, b in ((i, j), (j, i)):
            Vb = set(parts[b])
            for v in parts[a]:
                S = Gp.neighbours(v) & Vb
                if S:
                    nbhd[v][b] = S
    if kappa is None:
        kappa = min(default_kappa(t, delta_c, d, mu), 0.5)
    failures: Counter = Counter()
    for attempt in range(1, max_attempts + 1):
        rng = derive(seed, "attempt", attempt)
        try:
            split = degree_split(Gp, padded, t, kappa, rng, strategy, dict(nbhd) if R_S else None)
        except BudgetExhausted:
            failures["degree_split"] += 1
            continue
        colour_class = {}
        for l, C in enumerate(split.classes):
            for a in C:
                colour_class[a] = l
        subs, verdicts, ok = {}, {}, True
        for i, j in pairs:
            Vi, Vj = list(parts[i]), list(parts[j])
            M = Gp.bipartite_matrix(Vi, Vj)
            cls = np.full(M.shape, -1)
            I, J = np.nonzero(M)
            for a, b in zip(I.tolist(), J.tolist()):
                ls = {colour_class[x] for x in padded(Vi[a], Vj[b])}
                if len(ls) == 1:
                    cls[a, b] = ls.pop()
            for l in want((i, j)):
                B = BipartiteGraph(Vi, Vj, cls == l)
                v = test_pair(B, eps=2 * eps, d=d / t ** delta_c, flavour=flav((i, j)), mode=mode,
                              trials=trials, seed=derive(rng, "slice", l, i, j))
                subs[(l, i, j)] = B
                verdicts[(l, i, j)] = v.to_json()
                if not v.passed:
                    ok = False
                    failures[f"slice {l} of pair {(i, j)}"] += 1
                    break
            if not ok:
                break
        if ok:
            classes = [C & real for C in split.classes]
            return SeparationResult(classes, split.classes, subs, verdicts, attempt, split, padded, failures)
    raise BudgetExhausted("separate_colours: no split passed every slice check",
                          {"attempts": max_attempts, "failures": dict(failures)})


def _pair_edges(G: PartitionedGraph, Vi, Vj):
    Vj = set(Vj)
    return [edge_key(v, w) for v in Vi for w in G.neighbours(v) if w in Vj]
