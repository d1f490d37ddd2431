from collections import Counter
from itertools import permutations

import numpy as np
import pytest

from rainbowblowup.errors import BudgetExhausted, InstanceError
from rainbowblowup.graphcore import BipartiteGraph
from rainbowblowup.matching import (ConflictSystem, PMSampler, SwitchChain, apply_switch, count_switchable,
                                    covering_conflict_free_matching, enumerate_perfect_matchings,
                                    hall_violator, has_perfect_matching, is_perfect_matching,
                                    maximum_matching, run_parallel_chains, sample_conflict_free_pm,
                                    sample_uniform_pm)


def knn(n):
    return BipartiteGraph.complete(range(n), range(n, 2 * n))


def c6():
    # a0 b0 a1 b1 a2 b2 a0
    return BipartiteGraph.from_edges([0, 1, 2], [3, 4, 5], [(0, 3), (1, 3), (1, 4), (2, 4), (2, 5), (0, 5)])


def brute_pms(B):
    out = []
    for perm in permutations(B.right):
        if all(B.has_edge(a, b) for a, b in zip(B.left, perm)):
            out.append(dict(zip(B.left, perm)))
    return out


def brute_switchable(B, M, e):
    a1, b1 = e
    inv = {b: a for a, b in M.items()}
    out = []
    for a, b in B.edges():
        if M[a] == b:
            continue
        if B.has_edge(a1, M[a]) and B.has_edge(inv[b], b1):
            out.append((a, b))
    return out


def test_enumerate_examples():
    assert len(enumerate_perfect_matchings(knn(3))) == 6
    assert len(enumerate_perfect_matchings(c6())) == 2
    iso = BipartiteGraph(range(3), range(3, 6), np.ones((3, 3), dtype=bool))
    iso.adj[1] = False
    assert enumerate_perfect_matchings(iso) == []
    with pytest.raises(InstanceError):
        enumerate_perfect_matchings(BipartiteGraph.complete(range(2), range(2, 5)))
    with pytest.raises(InstanceError):
        enumerate_perfect_matchings(knn(13))


def test_enumerate_matches_permutations(rng):
    for _ in range(20):
        B = BipartiteGraph(range(5), range(5, 10), rng.random((5, 5)) < 0.6)
        got = enumerate_perfect_matchings(B)
        assert sorted(map(lambda m: tuple(sorted(m.items())), got)) == \
            sorted(map(lambda m: tuple(sorted(m.items())), brute_pms(B)))
        assert has_perfect_matching(B) == bool(got)
        if not got:
            S = hall_violator(B)
            N = {b for a in S for b in B.neighbours_of_left(a)}
            assert len(N) < len(S)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_switchable_knn(n):
    B = knn(n)
    M = dict(zip(range(n), range(n, 2 * n)))
    for e in M.items():
        cnt, lst = count_switchable(B, M, e)
        assert cnt == n * n - n
        assert sorted(lst) == sorted(brute_switchable(B, M, e))


def test_switchable_matching_only_and_c6():
    M = {0: 3, 1: 4, 2: 5}
    B = BipartiteGraph.from_edges([0, 1, 2], [3, 4, 5], M.items())
    assert count_switchable(B, M, (0, 3))[0] == 0
    G = c6()
    for M in enumerate_perfect_matchings(G):
        for e in M.items():
            assert count_switchable(G, M, e) == (len(brute_switchable(G, M, e)), brute_switchable(G, M, e))
    with pytest.raises(InstanceError):
        count_switchable(G, {0: 3, 1: 4, 2: 5}, (0, 4))


def test_apply_switch_keeps_perfect(rng):
    for _ in range(20):
        B = BipartiteGraph(range(6), range(6, 12), rng.random((6, 6)) < 0.7)
        if not has_perfect_matching(B):
            continue
        M = maximum_matching(B)
        for e in M.items():
            for f in count_switchable(B, M, e)[1]:
                M2 = apply_switch(M, e, f)
                assert is_perfect_matching(B, M2)
                assert M2[f[0]] == f[1] and M2[e[0]] != e[1]


def test_chain_moves_keep_perfect(rng):
    B = BipartiteGraph(range(8), range(8, 16), rng.random((8, 8)) < 0.6)
    B.adj[np.arange(8), np.arange(8)] = True
    ch = SwitchChain(B, rng)
    for _ in range(50):
        ch.run(7)
        assert is_perfect_matching(B, ch.state())


def test_unique_matching_both_modes():
    M = {0: 3, 1: 4, 2: 5}
    B = BipartiteGraph.from_edges([0, 1, 2], [3, 4, 5], list(M.items()) + [(0, 4)])
    for mode in ("exact", "chain"):
        assert sample_uniform_pm(B, seed=1, mode=mode, burn_in=50) == M


def test_edgeless_errors():
    with pytest.raises(InstanceError):
        sample_uniform_pm(BipartiteGraph(range(2), range(2, 4)), seed=0)


def test_exact_mode_uniform():
    B = knn(3)
    s = PMSampler(B, seed=4, mode="exact")
    counts = Counter(tuple(sorted(s.draw().items())) for _ in range(60_000))
    assert len(counts) == 6
    sigma = np.sqrt(60_000 * (1 / 6) * (5 / 6))
    assert all(abs(v - 10_000) < 5 * sigma for v in counts.values())


def test_chain_mode_k33_frequencies():
    m = run_parallel_chains(knn(3), 6000, 200, seed=3)
    counts = Counter(map(tuple, m.tolist()))
    assert len(counts) == 6
    assert all(abs(v / 6000 - 1 / 6) < 0.2 / 6 for v in counts.values())


def test_conflict_system_basics():
    F = ConflictSystem([((0, 2), (1, 3)), ((1, 3), (0, 2)), ((0, 3), (1, 3))])
    assert len(F) == 2 and F.k == 2 and F.count((0, 2)) == 1
    assert not F.is_conflict_free({0: 2, 1: 3})
    assert F.conflicts_in({0: 2, 1: 3}) == [((0, 2), (1, 3))]
    assert F.is_conflict_free({0: 3, 1: 2})
    assert F.to_json()["pairs"] == [[0, 2], [1, 2]]
    with pytest.raises(InstanceError):
        ConflictSystem([((0, 1), (0, 1))])


def test_conflict_free_examples():
    B = knn(2)
    M, tries = sample_conflict_free_pm(B, ConflictSystem(), seed=0)
    assert tries == 1 and is_perfect_matching(B, M)
    F = ConflictSystem([((0, 2), (1, 3))])
    hits = 0
    total = 0
    for seed in range(300):
        M, tries = sample_conflict_free_pm(B, F, seed=seed)
        assert M == {0: 3, 1: 2}
        hits += 1
        total += tries
    assert hits / total == pytest.approx(0.5, abs=0.08)
    Fall = ConflictSystem([((0, 2), (1, 3)), ((0, 3), (1, 2))])
    with pytest.raises(BudgetExhausted):
        sample_conflict_free_pm(B, Fall, seed=0, max_attempts=50)


def test_covering_examples():
    assert covering_conflict_free_matching([], [], [], ConflictSystem(), seed=0) == {}
    seen = Counter()
    for seed in range(600):
        M = covering_conflict_free_matching([[0]], [[10, 11, 12]], [(0, 10), (0, 11), (0, 12)],
                                            ConflictSystem(), seed=seed)
        assert len(M) == 1
        seen[M[0]] += 1
    assert set(seen) == {10, 11, 12}
    assert all(abs(v - 200) < 60 for v in seen.values())


def test_covering_random_dense(rng):
    X = [[0, 1], [2, 3]]
    V = [list(range(10, 16)), list(range(20, 26))]
    edges = [(x, v) for Xi, Vi in zip(X, V) for x in Xi for v in Vi if rng.random() < 0.8]
    pairs = []
    for _ in range(6):
        a, b = rng.choice(len(edges), 2, replace=False)
        if edges[a] != edges[b]:
            pairs.append((edges[a], edges[b]))
    F = ConflictSystem(pairs)
    M = covering_conflict_free_matching(X, V, edges, F, min_degree_check=(0.3, 12, 2), seed=1)
    assert set(M) == {0, 1, 2, 3}
    assert len(set(M.values())) == 4
    assert all((x, v) in set(edges) for x, v in M.items())
    assert F.is_conflict_free(M)


def test_covering_degree_check():
    with pytest.raises(InstanceError):
        covering_conflict_free_matching([[0]], [[10, 11, 12, 13]], [(0, 10)], ConflictSystem(),
                                        min_degree_check=(0.5, 8, 2))
