from itertools import combinations

import networkx as nx
import pytest

from rainbowblowup.errors import BudgetExhausted, InstanceError
from rainbowblowup.generate import random_bounded_tree
from rainbowblowup.graphcore import PartitionedGraph, build_partitioned_graph
from rainbowblowup.partition import (equitable_colouring, is_two_independent, round_colouring, square_graph,
                                     square_nx, tree_cycle_partition, two_independent_refine,
                                     verify_tree_partition)


def dist_at_least_3(H, part):
    g = H.to_networkx()
    for a, b in combinations(part, 2):
        try:
            if nx.shortest_path_length(g, a, b) < 3:
                return False
        except nx.NetworkXNoPath:
            pass
    return True


def test_square_path():
    H = build_partitioned_graph([4], [(0, 1), (1, 2), (2, 3)])
    assert set(square_graph(H).edges) == {(0, 1), (1, 2), (2, 3), (0, 2), (1, 3)}


def test_square_edgeless_and_star():
    assert square_graph(build_partitioned_graph([5], [])).edge_count == 0
    star = build_partitioned_graph([4], [(0, 1), (0, 2), (0, 3)])
    assert square_graph(star).edge_count == 6


def test_square_neighbourhood_formula():
    g = nx.gnp_random_graph(15, 0.2, seed=4)
    H = PartitionedGraph([range(15)], g.edges)
    sq = square_graph(H)
    for v in range(15):
        expect = set(g[v]) | {w for u in g[v] for w in g[u]}
        expect.discard(v)
        assert sq.neighbours(v) == expect
    assert {tuple(sorted(e)) for e in square_nx(g).edges} == set(sq.edges)


def test_equitable_c6():
    cls = equitable_colouring(nx.cycle_graph(6), 3).classes
    assert sorted(len(c) for c in cls) == [2, 2, 2]
    g = nx.cycle_graph(6)
    for c in cls:
        assert not any(g.has_edge(a, b) for a, b in combinations(c, 2))


def test_equitable_edgeless_and_error():
    g = nx.empty_graph(7)
    assert sorted(len(c) for c in equitable_colouring(g, 3).classes) == [2, 2, 3]
    with pytest.raises(InstanceError):
        equitable_colouring(nx.path_graph(5), 2)
    with pytest.raises(InstanceError):
        equitable_colouring(nx.empty_graph(2), 3)


def test_two_independent_refine_path():
    # a path, class = even positions 0,2,...,14 (8 vertices), 4 parts
    H = build_partitioned_graph([16], [(i, i + 1) for i in range(15)])
    cls = list(range(0, 16, 2))
    parts = two_independent_refine(H, cls, 4)
    assert sorted(v for p in parts for v in p) == cls
    assert all(len(p) == 2 for p in parts)
    for p in parts:
        assert dist_at_least_3(H, p)
        assert is_two_independent(H, p)


def test_two_independent_refine_trivial_and_errors():
    H = build_partitioned_graph([9], [(0, 1), (3, 4), (6, 7)])
    parts = two_independent_refine(H, [0, 3, 6, 8], 2)
    assert sorted(len(p) for p in parts) == [2, 2]
    H2 = build_partitioned_graph([3], [(0, 1), (1, 2)])
    with pytest.raises(InstanceError):
        two_independent_refine(H2, [0, 2], 1)
    with pytest.raises(InstanceError):
        two_independent_refine(H2, [0, 2], 3, exact=True)


def test_round_colouring_examples():
    R = nx.Graph([(1, 2)])
    psi = round_colouring(R, 1)
    assert psi.psi[1] != psi.psi[2] and psi.T == 2 and psi.psi[0] == 0
    tri = round_colouring(nx.Graph([(1, 2), (2, 3), (1, 3)]), 2)
    assert len({tri.psi[i] for i in (1, 2, 3)}) == 3
    assert round_colouring(nx.Graph([(1, 2), (2, 3), (1, 3)]), 2, force_T=True).T == 5
    R0 = nx.Graph()
    R0.add_nodes_from([1, 2, 3])
    assert {round_colouring(R0).psi[i] for i in (1, 2, 3)} == {1}
    with pytest.raises(InstanceError):
        round_colouring(nx.star_graph(3), 2)


def test_round_colouring_proper_on_square():
    for seed in range(10):
        R = nx.gnp_random_graph(10, 0.25, seed=seed)
        R = nx.relabel_nodes(R, {i: i + 1 for i in R})
        psi = round_colouring(R).psi
        for i in R:
            nb = list(R[i])
            for j in nb:
                assert psi[i] != psi[j]
            for a, b in combinations(nb, 2):
                assert psi[a] != psi[b]


def test_tree_partition_path():
    T = nx.path_graph(30)
    tp = tree_cycle_partition(T, 3, 0.2, seed=1)
    assert verify_tree_partition(T, tp.classes)


def test_tree_partition_star_fails():
    with pytest.raises(BudgetExhausted):
        tree_cycle_partition(nx.star_graph(59), 3, 0.05, seed=0, max_attempts=20)


def test_tree_partition_random_tree():
    T = random_bounded_tree(300, 3, seed=7)
    tp = tree_cycle_partition(T, 5, 0.2, seed=2)
    pos = {v: i for i, c in enumerate(tp.classes) for v in c}
    for a, b in T.edges:
        assert (pos[a] - pos[b]) % 5 in (1, 4)
    assert all(0.8 * 60 - 1e-9 <= len(c) <= 1.2 * 60 + 1e-9 for c in tp.classes)
    for i, c in enumerate(tp.classes):
        hats = sum(1 for v in c if all(pos[w] == (i - 1) % 5 for w in T[v]))
        assert tp.hat_counts[i] == hats


def test_tree_partition_preconditions():
    with pytest.raises(InstanceError):
        tree_cycle_partition(nx.path_graph(10), 4, 0.2)
    with pytest.raises(InstanceError):
        tree_cycle_partition(nx.cycle_graph(10), 3, 0.2)
