"""Builders and brute-force oracles shared by the test modules."""
import networkx as nx
import numpy as np

from rainbowblowup.embedder import BlowUpInstance, EmbeddingState, reserve_colours
from rainbowblowup.fourgraphs import a_sigma, project_candidacy
from rainbowblowup.errors import InstanceError
from rainbowblowup.graphcore import BipartiteGraph, EdgeSetColouring, PartitionedGraph, build_partitioned_graph
from rainbowblowup.partition import round_colouring


ACCEPTANCE_LINES: list[str] = []


def acceptance(number: int, ok: bool, detail: str) -> None:
    """Print and record the verdict line of one acceptance criterion."""
    line = f"ACCEPTANCE {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def random_bipartite(n1, n2, p, rng, left_offset=0, right_offset=100):
    M = rng.random((n1, n2)) < p
    return BipartiteGraph(range(left_offset, left_offset + n1), range(right_offset, right_offset + n2), M)


def toy_instance(sizes, R_edges, H_edges, G_edges, colours, universe=None, form="matchings", **kw):
    """Instance with contiguous parts of the given sizes (part 0 first) on both
    sides and complete candidacy graphs."""
    H = build_partitioned_graph(sizes, H_edges)
    G = build_partitioned_graph(sizes, G_edges)
    R = nx.Graph()
    R.add_nodes_from(range(1, len(sizes)))
    R.add_edges_from(R_edges)
    if universe is None:
        universe = 1 + max((a for cs in colours.values() for a in cs), default=0)
    c = EdgeSetColouring(universe, colours)
    A = {i: BipartiteGraph.complete(H.parts[i], G.parts[i]) for i in range(1, len(sizes))}
    return BlowUpInstance(H, G, R, A, c, form=form, **kw)


def mid_round_state(I, seed, mode="split", rounds_done=1):
    """Reservation plus a partial embedding of the first rounds, each cluster
    sent along a uniformly random perfect matching of its candidacy graph."""
    from rainbowblowup.matching import sample_uniform_pm
    from rainbowblowup.embedder import update_candidacy

    psi = round_colouring(I.R)
    res = reserve_colours(I, I.phi0, psi, mode=mode, seed=seed, reg_mode="sampled", trials=100)
    state = EmbeddingState(I, res, 0, dict(I.phi0), {})
    rng = np.random.default_rng(seed)
    for t in range(1, min(rounds_done, psi.T) + 1):
        try:
            images = {}
            for i in psi.rounds()[t - 1]:
                A = update_candidacy(state, state.phi, i)
                images.update(sample_uniform_pm(A, rng, mode="chain", burn_in=200))
        except InstanceError:       # no perfect matching left: stop at round t - 1
            break
        state.phi.update(images)
        state.t = t
    return state


def brute_candidacy(state, phi, j):
    I, res = state.instance, state.reservation
    A0 = res.A0[j]
    out = A0.copy()
    for x in A0.left:
        for v in A0.right:
            ok = A0.has_edge(x, v)
            for y in I.H.neighbours(x):
                if y in phi and not res.Gstar.has_edge(phi[y], v):
                    ok = False
            out.adj[A0.lindex(x), A0.rindex(v)] = ok
    return out


def composed_candidacy(state, phi, j):
    """Candidacy of X_j via the four-graphs route: for each embedded
    neighbour cluster i, project A onto X_i along the H-matching, intersect
    with A_sigma for sigma = phi on X_i, and project back."""
    I, res = state.instance, state.reservation
    A = res.A0[j]
    for i in sorted(I.R.neighbors(j)):
        Xi = I.H.parts[i]
        if not all(x in phi for x in Xi):
            continue
        pi = {x: next(iter(I.H.neighbours(x) & set(Xi))) for x in I.H.parts[j]}
        P = project_candidacy(A, pi)
        sigma_img = [phi[x] for x in P.left]
        Vi = BipartiteGraph(sorted(set(sigma_img)), A.right,
                            res.Gstar.bipartite_matrix(sorted(set(sigma_img)), list(A.right)))
        As = a_sigma({x: phi[x] for x in P.left}, P, Vi)
        A = project_candidacy(As, {y: x for x, y in pi.items()})
        A = BipartiteGraph(res.A0[j].left, A.right,
                           A.adj[[A.lindex(x) for x in res.A0[j].left]])
    if I.H.parts[0]:
        for x in A.left:
            for y in I.H.neighbours(x) & set(I.H.parts[0]):
                for v in A.right:
                    if not res.Gstar.has_edge(phi[y], v):
                        A.adj[A.lindex(x), A.rindex(v)] = False
    return A
