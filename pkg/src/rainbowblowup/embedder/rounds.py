"""The round-by-round embedding: candidacy updates, the conflict system of a
round, and the retry/backtrack loop that extends the exceptional
pre-embedding cluster by cluster.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import networkx as nx
import numpy as np

from ..errors import BudgetExhausted, InstanceError, InvariantBreach
from ..fourgraphs import project_candidacy
from ..graphcore import BipartiteGraph, edge_key
from ..matching import ConflictSystem, hall_violator, has_perfect_matching, sample_conflict_free_pm
from ..partition import round_colouring
from ..regularity import filter_triple_condition, test_pair
from ..rng import SeedLike, derive
from .colours import Reservation, reserve_colours
from .instance import BlowUpInstance, verify_embedding


@dataclass
class EmbedParams:
    """Knobs of the embedding pipeline.  ``None`` means: take it from the instance."""
    eps: float | None = None
    d: float | None = None
    mu: float | None = None
    strategy: str = "reduce"          # general instances: reduce | direct
    reservation: str = "auto"         # split | ledger | auto
    merge: bool = True
    split_strategy: str = "retry"
    split_attempts: int = 50
    kappa: float | None = None
    force_T: bool = False
    triple_filter: bool = True
    gate: str = "super"               # super | matching
    gate_flavour: str = "lower-super"
    eps_ladder: Sequence[float] | None = None
    round_retries: int = 20
    backtracks: int = 3
    backtrack_depth: int = 1
    conflict_attempts: int = 200
    sampler_mode: str = "auto"
    burn_in: int | None = None
    thin: int | None = None
    reg_mode: str = "auto"
    trials: int = 2000
    super_regularize: bool = True
    refine_attempts: int = 50


def resolve_reservation(P: "EmbedParams", form: str, reduced: bool = False, R=None) -> str:
    """``auto`` splits colours only for instances given in matchings form whose
    reduced graph is a forest; after a reduction, on general instances or
    around cycles of R the colour slices get too thin at small n."""
    if P.reservation != "auto":
        return P.reservation
    forest = R is None or R.number_of_nodes() == 0 or nx.is_forest(R)
    return "split" if form == "matchings" and not reduced and forest else "ledger"


def reserve_for(I: BlowUpInstance, phi0: Mapping[int, int], psi, P: "EmbedParams", seed: SeedLike = None,
                reduced: bool = False, R=None) -> Reservation:
    """Run the colour reservation in the resolved mode.  Under ``auto`` a
    colour split that exhausts its budget falls back to the ledger."""
    mode = resolve_reservation(P, I.form, reduced, I.R if R is None else R)
    kw = dict(mu=P.mu, eps=P.eps, d=P.d, seed=derive(seed, "reserve"), strategy=P.split_strategy,
              kappa=P.kappa, max_attempts=P.split_attempts, reg_mode=P.reg_mode, trials=P.trials)
    try:
        return reserve_colours(I, phi0, psi, mode=mode, **kw)
    except BudgetExhausted as exc:
        if P.reservation != "auto" or mode != "split":
            raise
        res = reserve_colours(I, phi0, psi, mode="ledger", **kw)
        res.report["fallback"] = {"from": "split", "reason": str(exc)}
        return res


def eps_ladder(eps: float, T: int, ladder: Sequence[float] | None = None) -> list[float]:
    """eps_0 = eps, eps_{t+1} = 2 sqrt(eps_t), clamped below 1."""
    if ladder is not None:
        out = [min(0.99, float(e)) for e in ladder]
        while len(out) < T + 1:
            out.append(out[-1])
        return out
    out = [min(0.99, eps)]
    for _ in range(T):
        out.append(min(0.99, 2 * math.sqrt(out[-1])))
    return out


@dataclass
class EmbeddingState:
    instance: BlowUpInstance
    reservation: Reservation
    t: int
    phi: dict[int, int]
    candidacy: dict[int, BipartiteGraph]
    used: set[int] = field(default_factory=set)

    def copy(self) -> "EmbeddingState":
        return EmbeddingState(self.instance, self.reservation, self.t, dict(self.phi),
                              dict(self.candidacy), set(self.used))

    def embedded_clusters(self) -> list[int]:
        return self.reservation.psi.embedded_after(self.t)


def update_candidacy(state: EmbeddingState, phi: Mapping[int, int], j: int) -> BipartiteGraph:
    """v is a candidate for x in X_j iff xv is in A_0^j and phi(y)v is a
    G*-edge for every embedded H-neighbour y of x."""
    I = state.instance
    H = I.H
    for k in list(I.R.neighbors(j)):
        done = [x in phi for x in H.parts[k]]
        if any(done) and not all(done):
            raise InstanceError(f"phi covers cluster {k} only partially")
    if any(x in phi for x in H.parts[0]) and not all(x in phi for x in H.parts[0]):
        raise InstanceError("phi covers X_0 only partially")
    A0 = state.reservation.A0[j]
    M = state.reservation.matrix
    cols = np.array(A0.right, dtype=np.int64)
    adj = A0.adj.copy()
    for a, x in enumerate(A0.left):
        imgs = [phi[y] for y in H.neighbours(x) if y in phi]
        if imgs:
            adj[a] &= M[np.ix_(imgs, cols)].all(axis=0)
    return A0.with_adj(adj)


def forced_colour_sets(state: EmbeddingState, x: int, v: int) -> list[frozenset]:
    """Colour sets of F_xv: the edges phi(y)v for embedded neighbours y of x."""
    c = state.instance.c
    return [c(state.phi[y], v) for y in state.instance.H.neighbours(x) if y in state.phi]


def _forced_ok(sets: list[frozenset], used: set[int]) -> bool:
    seen: set[int] = set()
    for s in sets:
        if s & seen or s & used:
            return False
        seen |= s
    return True


def prune_forced(state: EmbeddingState, B: BipartiteGraph) -> tuple[BipartiteGraph, int]:
    """Drop candidacy edges xv whose forced colours overlap each other or the
    used-colour ledger (embedding x at v could not be rainbow)."""
    adj = B.adj.copy()
    removed = 0
    for a, b in zip(*np.nonzero(adj)):
        if not _forced_ok(forced_colour_sets(state, B.left[a], B.right[b]), state.used):
            adj[a, b] = False
            removed += 1
    return B.with_adj(adj), removed


def round_conflict_system(state: EmbeddingState, blocks: Sequence[BipartiteGraph],
                          strict: bool = True) -> tuple[ConflictSystem, dict]:
    """Conflicts between candidacy edges of the coming round: xv and x'v'
    conflict when their forced colour sets Z_xv and Z_x'v' meet."""
    I = state.instance
    by_colour: dict[int, list] = defaultdict(list)
    violations = []
    for B in blocks:
        for a, b in zip(*np.nonzero(B.adj)):
            x, v = B.left[a], B.right[b]
            sets = forced_colour_sets(state, x, v)
            if not _forced_ok(sets, state.used):
                violations.append([x, v])
                continue
            for alpha in frozenset().union(*sets) if sets else ():
                by_colour[alpha].append((x, v))
    if violations and strict:
        raise InvariantBreach(f"forced colours not disjoint at {len(violations)} candidacy edges, "
                              f"e.g. {violations[0]}")
    pairs = []
    for edges in by_colour.values():
        for p in range(len(edges)):
            for q in range(p + 1, len(edges)):
                if edges[p] != edges[q]:
                    pairs.append((edges[p], edges[q]))
    F = ConflictSystem(pairs)
    bound = 4 * I.mu * I.delta ** 2 * I.n
    return F, {"conflicts": len(F), "k": F.k, "k_bound": bound, "k_within_bound": F.k <= bound,
               "disjointness_ok": not violations, "violations": len(violations)}


class _RoundFailure(Exception):
    def __init__(self, reason: str, fatal: bool = False, detail=None):
        super().__init__(reason)
        self.reason, self.fatal, self.detail = reason, fatal, detail


@dataclass
class EmbedResult:
    phi: dict[int, int]
    report: dict


def _matching_map(I: BlowUpInstance, src: int, dst: int) -> dict[int, int]:
    Xd = set(I.H.parts[dst])
    out = {}
    for x in I.H.parts[src]:
        nb = I.H.neighbours(x) & Xd
        if len(nb) != 1:
            return {}
        out[x] = next(iter(nb))
    return out if len(set(out.values())) == len(out) == len(Xd) else {}


def _pair_block(res: Reservation, Vi, Vj) -> BipartiteGraph:
    return BipartiteGraph(Vi, Vj, res.matrix[np.ix_(list(Vi), list(Vj))])


def _try_round(state: EmbeddingState, clusters: list[int], ladder: list[float], P: EmbedParams,
               strict: bool, rng) -> tuple[EmbeddingState, dict]:
    I, res = state.instance, state.reservation
    psi = res.psi.psi
    tn = state.t + 1
    info: dict = {"filter_removed": {}, "pruned": 0}
    blocks = []
    for i in clusters:
        A = state.candidacy[i]
        if P.triple_filter and I.form == "matchings":
            pairs = []
            for j in sorted(I.R.neighbors(i)):
                if psi[j] <= tn:
                    continue
                pi = _matching_map(I, j, i)
                if not pi:
                    continue
                Pj = project_candidacy(state.candidacy[j], pi)
                Gij = _pair_block(res, A.right, state.candidacy[j].right)
                pairs.append((Pj, Gij, state.candidacy[j].density(), Gij.density()))
            if pairs:
                Af, removed = filter_triple_condition(A, pairs, ladder[state.t], len(A.right))
                # at small n an atypical host vertex can empty a whole column
                if has_perfect_matching(Af):
                    A = Af
                    info["filter_removed"][i] = round(removed, 4)
                else:
                    info.setdefault("filter_skipped", []).append(i)
        if not strict:
            A, k = prune_forced(state, A)
            info["pruned"] += k
        if not has_perfect_matching(A):
            raise _RoundFailure("no_perfect_matching", fatal=True,
                                detail={"cluster": i, "hall_violator": (hall_violator(A) or [])[:10]})
        blocks.append(A)
    F, crep = round_conflict_system(state, blocks, strict)
    info.update(crep)
    try:
        sigma, tries = sample_conflict_free_pm(blocks, F, rng, P.conflict_attempts, P.sampler_mode,
                                               P.burn_in, P.thin)
    except BudgetExhausted:
        raise _RoundFailure("conflict") from None
    info["sampler_attempts"] = tries
    new = state.copy()
    new.t = tn
    c, H = I.c, I.H
    fresh: set[int] = set()
    for x, v in sigma.items():
        for y in H.neighbours(x):
            if y in state.phi:
                cs = c(v, state.phi[y])
                if cs & fresh or cs & state.used:
                    raise InvariantBreach(f"round {tn} repeats a colour at edge {edge_key(v, state.phi[y])}")
                fresh |= cs
    new.phi.update(sigma)
    new.used |= fresh
    if not new.used <= res.cumulative(tn):
        raise InvariantBreach(f"colours outside C*_{tn} used after round {tn}")
    info["colour_separation_ok"] = True
    for i in clusters:
        del new.candidacy[i]
    gate = {}
    touched = sorted({j for i in clusters for j in I.R.neighbors(i) if psi[j] > tn})
    for j in touched:
        old = state.candidacy[j]
        A = update_candidacy(new, new.phi, j)
        if (A.adj & ~old.adj).any():
            raise InvariantBreach(f"candidacy of cluster {j} grew in round {tn}")
        new.candidacy[j] = A
        if not has_perfect_matching(A):
            raise _RoundFailure("candidacy_collapse", detail={"cluster": j})
        if P.gate == "super":
            dt = old.density()
            for i in clusters:
                if I.R.has_edge(i, j):
                    dt *= _pair_block(res, I.G.parts[i], I.G.parts[j]).density()
            v = test_pair(A, eps=ladder[tn], d=min(1.0, max(dt, 1e-6)), flavour=P.gate_flavour,
                          mode=P.reg_mode, trials=P.trials, seed=derive(rng, "gate", j))
            gate[j] = {"passed": v.passed, "eps": ladder[tn], "d": dt, "density": A.density()}
            if not v.passed:
                raise _RoundFailure("regularity", detail={"cluster": j, "witness": v.witness})
    info["gate"] = gate
    return new, info


def embed_rounds(I: BlowUpInstance, phi0: Mapping[int, int] | None = None, seed: SeedLike = None,
                 params: EmbedParams | None = None, reservation: Reservation | None = None) -> EmbedResult:
    """Embed H round by round: in round t every cluster i with psi(i) = t is
    mapped along a conflict-free perfect matching of its (filtered) candidacy
    graph.  Failed rounds are retried with fresh randomness, then the previous
    round is redone, until the budgets run out."""
    P = params or EmbedParams()
    phi0 = dict(I.phi0 if phi0 is None else phi0)
    if reservation is None:
        psi = round_colouring(I.R, force_T=P.force_T)
        reservation = reserve_for(I, phi0, psi, P, seed)
    psi = reservation.psi
    J = psi.rounds()
    T = psi.T
    strict = I.form == "matchings" and reservation.mode == "split"
    ladder = eps_ladder(I.eps if P.eps is None else P.eps, T, P.eps_ladder)
    for i in I.clusters():
        if len(I.H.parts[i]) != len(I.G.parts[i]):
            raise InstanceError(f"cluster {i}: |X_i| != |V_i|")
    state = EmbeddingState(I, reservation, 0, dict(phi0), {})
    for j in I.clusters():
        state.candidacy[j] = update_candidacy(state, state.phi, j)
    rounds: list[dict] = [{"round": t + 1, "clusters": J[t], "attempts": 0, "visits": 0,
                           "failures": Counter()} for t in range(T)]
    history: list[EmbeddingState] = []
    backtracks = 0
    while state.t < T:
        t = state.t
        rep = rounds[t]
        rep["visits"] += 1
        done = None
        for attempt in range(P.round_retries):
            rep["attempts"] += 1
            if not J[t]:
                done = (state.copy(), {"colour_separation_ok": True, "disjointness_ok": True})
                done[0].t = t + 1
                break
            try:
                done = _try_round(state, J[t], ladder, P, strict,
                                  derive(seed, "round", t + 1, rep["visits"], attempt))
                break
            except _RoundFailure as f:
                rep["failures"][f.reason] += 1
                rep.setdefault("last_failure", f.detail)
                if f.fatal:
                    break
        if done is not None:
            history.append(state)
            state, info = done
            rep.update(info)
            continue
        if history and backtracks < P.backtracks:
            backtracks += 1
            for _ in range(min(P.backtrack_depth, len(history))):
                state = history.pop()
            continue
        raise BudgetExhausted(f"round {t + 1} failed after {rep['attempts']} attempts",
                              {"round": t + 1, "backtracks": backtracks,
                               "rounds": [_jsonable(r) for r in rounds]})
    ver = verify_embedding(I, state.phi, phi0)
    if not ver["ok"]:
        raise InvariantBreach(f"embedding failed verification: {ver['checks']}")
    report = {"T": T, "psi": {str(k): v for k, v in psi.psi.items()}, "backtracks": backtracks,
              "rounds": [_jsonable(r) for r in rounds], "reservation": _jsonable(reservation.report),
              "colour_separation_ok": all(r.get("colour_separation_ok", False) for r in rounds),
              "disjointness_ok": all(r.get("disjointness_ok", False) for r in rounds),
              "verification": ver}
    return EmbedResult(state.phi, report)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
