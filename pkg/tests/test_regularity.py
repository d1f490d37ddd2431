from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from rainbowblowup.errors import InstanceError
from rainbowblowup.graphcore import BipartiteGraph, build_partitioned_graph
from rainbowblowup.regularity import (density, filter_triple_condition, min_size, prune_to_super_regular,
                                      test_pair, typical_degree_filter, witness_violates)

from helpers import random_bipartite


def brute_verdict(B, eps, d, flavour):
    """Direct reading of the definition over every qualifying (S, T)."""
    n1, n2 = B.shape
    s0, t0 = min_size(eps, n1), min_size(eps, n2)
    two = flavour in ("regular", "super")
    lo, hi = d - eps, d + eps
    if flavour in ("super", "lower-super"):
        for deg, other in [(x, n2) for x in B.adj.sum(1)] + [(x, n1) for x in B.adj.sum(0)]:
            if deg < lo * other - 1e-9 or (two and deg > hi * other + 1e-9):
                return False
    for k in range(s0, n1 + 1):
        for S in combinations(range(n1), k):
            for m in range(t0, n2 + 1):
                for T in combinations(range(n2), m):
                    e = B.adj[np.ix_(S, T)].sum()
                    if e < lo * k * m - 1e-9 or (two and e > hi * k * m + 1e-9):
                        return False
    return True


def test_density_examples():
    G = build_partitioned_graph([2, 2], [(0, 2), (0, 3), (1, 2), (1, 3)])
    assert density(G, [0, 1], [2, 3]) == 1
    G0 = build_partitioned_graph([2, 2], [])
    assert density(G0, [0, 1], [2, 3]) == 0
    G3 = build_partitioned_graph([2, 2], [(0, 2), (0, 3), (1, 2)])
    assert density(G3, [0, 1], [2, 3]) == Fraction(3, 4)
    with pytest.raises(InstanceError):
        density(G3, [], [2])
    with pytest.raises(InstanceError):
        density(G3, [0, 2], [2, 3])


def test_k44_passes():
    B = BipartiteGraph.complete(range(4), range(4, 8))
    v = test_pair(B, eps=0.3, d=0.9, flavour="lower-super", mode="exact")
    assert v.passed and v.mode == "exact"


def test_k44_minus_matching_matches_brute_force():
    adj = ~np.eye(4, dtype=bool)
    B = BipartiteGraph(range(4), range(4, 8), adj)
    v = test_pair(B, eps=0.3, d=0.8, flavour="lower-super", mode="exact")
    assert v.passed == brute_verdict(B, 0.3, 0.8, "lower-super")


def test_isolated_vertex_degree_witness():
    adj = np.ones((5, 5), dtype=bool)
    adj[2] = False
    B = BipartiteGraph(range(5), range(5, 10), adj)
    v = test_pair(B, eps=0.2, d=0.9, flavour="super", mode="exact")
    assert not v.passed
    assert v.witness["kind"] == "degree" and v.witness["vertex"] == 2
    assert witness_violates(B, None, None, v)


def test_degenerate_eps_and_cap():
    B = BipartiteGraph.complete(range(4), range(4, 8))
    with pytest.raises(ValueError):
        test_pair(B, eps=1e-12, d=0.5, mode="exact")
    big = BipartiteGraph.complete(range(20), range(20, 40))
    with pytest.raises(ValueError):
        test_pair(big, eps=0.3, d=0.5, mode="exact")


@pytest.mark.parametrize("flavour", ["regular", "lower-regular", "super", "lower-super"])
def test_exact_equals_brute_force(flavour, rng):
    for _ in range(25):
        p = rng.choice([0.3, 0.5, 0.8])
        B = random_bipartite(5, 5, p, rng)
        eps, d = 0.35, float(rng.choice([0.3, 0.5, 0.7]))
        v = test_pair(B, eps=eps, d=d, flavour=flavour, mode="exact")
        assert v.passed == brute_verdict(B, eps, d, flavour)
        if not v.passed:
            assert witness_violates(B, None, None, v)


def test_typical_degree_filter_examples(rng):
    G = BipartiteGraph.complete(range(4), range(4, 8))
    assert typical_degree_filter(G, list(range(4)), list(range(4, 8)), 0.1, 0.5).bad == []
    G2 = build_partitioned_graph([1, 3], [])
    assert typical_degree_filter(G2, [0], [1, 2, 3], 0.1, 0.5).bad == [0]
    B = random_bipartite(20, 20, 0.5, rng)
    cen = typical_degree_filter(B, list(B.left), list(B.right), 0.2, 0.4)
    expect_bad = [a for a in B.left if len(B.neighbours_of_left(a)) < (0.4 - 0.2) * 20 - 1e-9]
    assert cen.bad == expect_bad
    assert sorted(cen.good + cen.bad) == sorted(B.left)


def test_prune_complete_pair():
    B = BipartiteGraph.complete(range(12), range(12, 24))
    out = prune_to_super_regular(B, eps=0.1, d=1.0, eps_prime=0.45, seed=3, mode="exact")
    assert not (out.adj & ~B.adj).any()
    assert out.left == B.left and out.right == B.right
    assert test_pair(out, eps=0.45, d=0.5, flavour="super", mode="exact").passed


def test_prune_accepts_already_regular():
    rng = np.random.default_rng(1)
    B = random_bipartite(10, 10, 0.5, rng)
    if test_pair(B, eps=0.45, d=0.5, flavour="super", mode="exact").passed:
        assert prune_to_super_regular(B, eps=0.3, d=1.0, eps_prime=0.45, seed=0, mode="exact") == B


def test_prune_non_square():
    with pytest.raises(InstanceError):
        prune_to_super_regular(BipartiteGraph.complete(range(3), range(3, 7)), eps=0.3, d=0.9, eps_prime=0.3)


def test_filter_triple_complete_keeps_everything():
    n = 6
    V1, V2, V3 = range(n), range(n, 2 * n), range(2 * n, 3 * n)
    G12 = BipartiteGraph.complete(V1, V2)
    out, removed = filter_triple_condition(
        G12, [(BipartiteGraph.complete(V1, V3), BipartiteGraph.complete(V2, V3), 1.0, 1.0)], 0.01, n)
    assert out == G12 and removed == 0


def test_filter_triple_matches_recount(rng):
    n = 10
    V1, V2, V3 = range(n), range(n, 2 * n), range(2 * n, 3 * n)
    G12 = BipartiteGraph(V1, V2, rng.random((n, n)) < 0.6)
    G13 = BipartiteGraph(V1, V3, rng.random((n, n)) < 0.5)
    G23 = BipartiteGraph(V2, V3, rng.random((n, n)) < 0.5)
    out, _ = filter_triple_condition(G12, [(G13, G23, 0.5, 0.5)], 0.1, n)
    for a in V1:
        for b in V2:
            common = len(set(G13.neighbours_of_left(a)) & set(G23.neighbours_of_left(b)))
            keep = G12.has_edge(a, b) and abs(common - 0.25 * n) <= 0.1 * n + 1e-9
            assert out.has_edge(a, b) == keep
    again, removed = filter_triple_condition(out, [(G13, G23, 0.5, 0.5)], 0.1, n)
    assert again == out and removed == 0


def test_filter_triple_empty_and_mismatch():
    G12 = BipartiteGraph(range(3), range(3, 6))
    G13 = BipartiteGraph.complete(range(3), range(6, 9))
    G23 = BipartiteGraph.complete(range(3, 6), range(6, 9))
    out, removed = filter_triple_condition(G12, [(G13, G23, 1, 1)], 0.1, 3)
    assert out.edge_count == 0 and removed == 0
    with pytest.raises(InstanceError):
        filter_triple_condition(G12, [(G23, G13, 1, 1)], 0.1, 3)


def test_sampled_never_stricter_than_exact(rng):
    for _ in range(30):
        B = random_bipartite(8, 8, rng.choice([0.3, 0.6]), rng)
        ex = test_pair(B, eps=0.3, d=0.5, flavour="lower-regular", mode="exact")
        sa = test_pair(B, eps=0.3, d=0.5, flavour="lower-regular", mode="sampled", trials=200, seed=1)
        if ex.passed:
            assert sa.passed
        if not sa.passed:
            assert witness_violates(B, None, None, sa)
