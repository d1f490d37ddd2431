"""Hypothesis properties for the invariants of every module."""
import itertools

import networkx as nx
import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from helpers import brute_candidacy, composed_candidacy, mid_round_state
from rainbowblowup.cli import gen_instance, run_pipeline, verify_report
from rainbowblowup.embedder import update_candidacy
from rainbowblowup.coloursplit import ExplicitHittingSet, gamma_values, multinomial, simplex_vectors
from rainbowblowup.fourgraphs import a_sigma, project_candidacy
from rainbowblowup.generate import blowup_instance, random_bounded_tree
from rainbowblowup.graphcore import (BipartiteGraph, EdgeSetColouring, PartitionedGraph, colour_boundedness,
                                     colour_degree, edge_key, is_rainbow, restrict_to_colours)
from rainbowblowup.matching import (ConflictSystem, SwitchChain, count_switchable, enumerate_perfect_matchings,
                                    is_perfect_matching, sample_conflict_free_pm, sample_uniform_pm)
from rainbowblowup.partition import (equitable_colouring, round_colouring, square_graph, tree_cycle_partition,
                                     verify_tree_partition)
from rainbowblowup.regularity import density, test_pair, witness_violates

fast = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def coloured_graphs(draw, max_n=8, universe=6):
    n = draw(st.integers(2, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    sets = [draw(st.sets(st.integers(0, universe - 1), min_size=1, max_size=3)) for _ in edges]
    G = PartitionedGraph([list(range(n))], edges)
    return G, EdgeSetColouring(universe, dict(zip(edges, sets)))


@st.composite
def bipartite(draw, max_side=5, square=False):
    n1 = draw(st.integers(1, max_side))
    n2 = n1 if square else draw(st.integers(1, max_side))
    bits = draw(st.lists(st.booleans(), min_size=n1 * n2, max_size=n1 * n2))
    return BipartiteGraph(range(n1), range(100, 100 + n2), np.array(bits, dtype=bool).reshape(n1, n2))


@st.composite
def with_perfect_matching(draw, max_side=5):
    """Square bipartite graph containing a planted perfect matching."""
    n = draw(st.integers(1, max_side))
    B = draw(bipartite(max_side=n, square=True).filter(lambda b: b.shape[0] == n))
    perm = draw(st.permutations(range(n)))
    adj = B.adj.copy()
    adj[np.arange(n), perm] = True
    return B.with_adj(adj)


# graphcore

@fast
@given(coloured_graphs())
def test_restrict_to_full_universe_is_identity(Gc):
    G, c = Gc
    assert set(restrict_to_colours(G, c, range(c.universe)).edges) == set(G.edges)


@fast
@given(coloured_graphs(), st.data())
def test_rainbow_is_antitone(Gc, data):
    G, c = Gc
    E = list(G.edges)
    if is_rainbow(E, c)[0]:
        sub = data.draw(st.lists(st.sampled_from(E), unique=True)) if E else []
        assert is_rainbow(sub, c)[0]


@fast
@given(coloured_graphs())
def test_colour_degree_sums(Gc):
    G, c = Gc
    for v in range(G.vertex_count):
        lhs = sum(colour_degree(G, c, v, a) for a in range(c.universe))
        rhs = sum(len(c(*edge_key(v, w))) for w in G.neighbours(v))
        assert lhs == rhs


@fast
@given(coloured_graphs(), st.permutations(range(6)))
def test_boundedness_invariant_under_relabelling(Gc, perm):
    G, c = Gc
    relabelled = EdgeSetColouring(c.universe, {e: [perm[a] for a in cs] for e, cs in c.assignment.items()})
    assert colour_boundedness(relabelled) == colour_boundedness(c)


# regularity

@fast
@given(bipartite(), st.data())
def test_density_times_size_is_edge_count(B, data):
    S = data.draw(st.lists(st.sampled_from(B.left), unique=True, min_size=1))
    T = data.draw(st.lists(st.sampled_from(B.right), unique=True, min_size=1))
    e = sum(B.has_edge(s, t) for s in S for t in T)
    D = density(B, S, T) * len(S) * len(T)
    assert D.denominator == 1 and D == e


@fast
@given(bipartite(max_side=5), st.sampled_from(["regular", "lower-regular", "super", "lower-super"]),
       st.sampled_from([0.2, 0.34, 0.5]), st.sampled_from([0.3, 0.5, 0.7]), st.integers(0, 10**6))
def test_exact_pass_implies_sampled_pass_and_witnesses_recount(B, flavour, eps, d, seed):
    exact = test_pair(B, eps=eps, d=d, flavour=flavour, mode="exact")
    sampled = test_pair(B, eps=eps, d=d, flavour=flavour, mode="sampled", trials=200, seed=seed)
    if exact.passed:
        assert sampled.passed
    for v in (exact, sampled):
        if not v.passed:
            assert witness_violates(B, None, None, v)


# partition

@fast
@given(coloured_graphs(max_n=9))
def test_square_graph_neighbourhoods(Gc):
    H, _ = Gc
    H2 = square_graph(H)
    for v in range(H.vertex_count):
        N = set(H.neighbours(v))
        N2 = N.union(*(set(H.neighbours(w)) for w in N)) - {v} if N else set()
        assert set(H2.neighbours(v)) == N2


@fast
@given(st.integers(1, 14), st.floats(0.05, 0.5), st.integers(0, 10**6))
def test_equitable_classes(n, p, seed):
    g = nx.gnp_random_graph(n, p, seed=seed)
    k = max(dg for _, dg in g.degree) + 1 if n else 1
    classes = equitable_colouring(g, k).classes
    sizes = [len(cl) for cl in classes]
    assert max(sizes) - min(sizes) <= 1
    for cl in classes:
        assert not any(g.has_edge(a, b) for a, b in itertools.combinations(cl, 2))


@fast
@given(st.integers(1, 10), st.floats(0.1, 0.7), st.integers(0, 10**6))
def test_round_colouring_is_proper_on_square(r, p, seed):
    R = nx.relabel_nodes(nx.gnp_random_graph(r, p, seed=seed), lambda v: v + 1)
    psi = round_colouring(R).psi
    for i in R:
        for j in R:
            if i < j and nx.has_path(R, i, j) and nx.shortest_path_length(R, i, j) <= 2:
                assert psi[i] != psi[j]


@settings(max_examples=15, deadline=None)
@given(st.integers(30, 90), st.integers(0, 10**6))
def test_tree_cycle_partition_edges_consecutive(n, seed):
    T = random_bounded_tree(n, 3, seed=seed)
    part = tree_cycle_partition(T, 3, 0.2, seed=seed)
    assert verify_tree_partition(T, part.classes)
    pos = {v: i for i, cl in enumerate(part.classes) for v in cl}
    assert all((pos[a] - pos[b]) % 3 in (1, 2) for a, b in T.edges)


# coloursplit

@given(st.integers(1, 6), st.integers(1, 6))
def test_multinomial_identity(t, delta):
    assert sum(multinomial(delta, s) for s in simplex_vectors(t, delta)) == t ** delta


@fast
@given(st.dictionaries(st.frozensets(st.tuples(st.integers(0, 3), st.integers(0, 1)), min_size=1, max_size=3),
                       st.floats(0.01, 1.0), min_size=1, max_size=5),
       st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_gamma_monotone(weights, lo, extra):
    weights = {Y: q for Y, q in weights.items() if len({i for i, _ in Y}) == len(Y)}
    if not weights:
        return
    Q = ExplicitHittingSet(weights)
    small = {(i, j): lo for i in range(4) for j in range(2)}
    big = dict(small)
    big[(0, 0)] = lo + extra
    assert gamma_values(Q, big) >= gamma_values(Q, small) - 1e-12


# matching

@fast
@given(with_perfect_matching(), st.integers(0, 10**6))
def test_sampler_outputs_are_perfect_matchings(B, seed):
    for mode in ("exact", "chain"):
        M = sample_uniform_pm(B, seed=seed, mode=mode)
        assert is_perfect_matching(B, M)


@fast
@given(with_perfect_matching(), st.integers(0, 10**6), st.integers(1, 60))
def test_switch_moves_preserve_matchings(B, seed, steps):
    chain = SwitchChain(B, np.random.default_rng(seed))
    for _ in range(steps):
        before = chain.state()
        chain.run(1)
        after = chain.state()
        assert is_perfect_matching(B, after)
        # one move swaps two or three matching edges
        assert len(set(before.items()) ^ set(after.items())) in (0, 4, 6)


@settings(max_examples=10, deadline=None)
@given(st.integers(3, 5), st.integers(0, 10**6))
def test_count_switchable_complete(n, seed):
    rng = np.random.default_rng(seed)
    B = BipartiteGraph.complete(range(n), range(n, 2 * n))
    perm = rng.permutation(n)
    M = {a: n + int(perm[a]) for a in range(n)}
    e = (0, M[0])
    assert count_switchable(B, M, e)[0] == n * n - n


@fast
@given(with_perfect_matching(max_side=4), st.integers(0, 10**6))
def test_conflict_free_output_has_no_conflicts(B, seed):
    rng = np.random.default_rng(seed)
    E = [(B.left[a], B.right[b]) for a, b in zip(*np.nonzero(B.adj))]
    pairs = [(E[i], E[j]) for i, j in itertools.combinations(range(len(E)), 2) if rng.random() < 0.15]
    F = ConflictSystem(pairs)
    free = [M for M in enumerate_perfect_matchings(B)
            if not any(frozenset(p) in F.pairs for p in itertools.combinations(M.items(), 2))]
    if not free:
        return
    M, _ = sample_conflict_free_pm(B, F, seed=seed, max_attempts=5000)
    assert is_perfect_matching(B, M)
    assert not any(frozenset(p) in F.pairs for p in itertools.combinations(M.items(), 2))


# fourgraphs

@fast
@given(st.integers(1, 5), st.data())
def test_a_sigma_subset_and_degrees(n, data):
    def draw(left, right):
        bits = data.draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
        return BipartiteGraph(left, right, np.array(bits, dtype=bool).reshape(n, n))
    V1, V2, V3 = range(n), range(10, 10 + n), range(20, 20 + n)
    G13, G23 = draw(V1, V3), draw(V2, V3)
    perm = data.draw(st.permutations(list(V2)))
    sigma = dict(zip(V1, perm))
    A = a_sigma(sigma, G13, G23)
    assert not (A.adj & ~G13.adj).any()
    for v1 in V1:
        want = set(G13.neighbours_of_left(v1)) & set(G23.neighbours_of_left(sigma[v1]))
        assert set(A.neighbours_of_left(v1)) == want


@fast
@given(bipartite(), st.data())
def test_project_preserves_degree_multiset(B, data):
    images = data.draw(st.permutations(list(range(50, 50 + len(B.left)))))
    P = project_candidacy(B, dict(zip(B.left, images)))
    assert sorted(P.adj.sum(1).tolist()) == sorted(B.adj.sum(1).tolist())


# embedder

@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([8, 12, 16]), st.sampled_from(["path", "cycle", "complete"]))
def test_update_candidacy_oracles(seed, cluster, shape):
    I = blowup_instance("matchings", r=4, cluster=cluster, p=0.7, k=2, R=shape, seed=seed)
    state = mid_round_state(I, seed, mode="ledger")
    for j in I.clusters():
        if any(x in state.phi for x in I.H.parts[j]):
            continue
        A = update_candidacy(state, state.phi, j)
        assert np.array_equal(A.adj, brute_candidacy(state, state.phi, j).adj)
        assert np.array_equal(A.adj, composed_candidacy(state, state.phi, j).adj)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]), st.sampled_from([20, 24]))
def test_pipeline_is_deterministic_and_sound(seed, r, cluster):
    inst = gen_instance("matchings-blowup", seed, r=r, cluster=cluster, p=0.7, k=2)
    code1, out1, rep1 = run_pipeline("embed", inst, {"seed": seed})
    code2, out2, rep2 = run_pipeline("embed", inst, {"seed": seed})
    assert (code1, out1) == (code2, out2)
    strip = lambda rep: {k: v for k, v in rep.items() if k not in ("seconds", "timings")}
    assert strip(rep1).keys() == strip(rep2).keys()
    if code1 == 0:
        assert verify_report(inst, out1)["ok"]
