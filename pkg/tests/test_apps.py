import copy
import itertools

import networkx as nx
import numpy as np
import pytest

from rainbowblowup import apps
from rainbowblowup.cli import _partial_inputs, gen_instance
from rainbowblowup.errors import InstanceError
from rainbowblowup.generate import planted_cycle_host, random_bounded_tree, random_host, paths_and_cycles


def brute_hamiltonian(R):
    nodes = sorted(R.nodes)
    if len(nodes) < 3:
        return False
    first, rest = nodes[0], nodes[1:]
    for perm in itertools.permutations(rest):
        cyc = (first,) + perm
        if all(R.has_edge(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))):
            return True
    return False


def is_cycle_of(R, cyc):
    return (sorted(cyc) == sorted(R.nodes)
            and all(R.has_edge(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))))


def test_hamilton_cycle_matches_brute_force(rng):
    for _ in range(60):
        r = int(rng.integers(3, 8))
        R = nx.gnp_random_graph(r, 0.5, seed=int(rng.integers(2**31)))
        cyc = apps.hamilton_cycle(R)
        assert (cyc is not None) == brute_hamiltonian(R)
        if cyc is not None:
            assert is_cycle_of(R, cyc)


def test_hamilton_cycle_small_and_limit():
    assert apps.hamilton_cycle(nx.path_graph(2)) is None
    assert is_cycle_of(nx.cycle_graph(3), apps.hamilton_cycle(nx.cycle_graph(3)))
    assert apps.hamilton_cycle(nx.star_graph(4)) is None
    with pytest.raises(InstanceError):
        apps.hamilton_cycle(nx.complete_graph(40))


def test_dirac_check():
    assert apps.dirac_check(nx.cycle_graph(4))["dirac"]
    assert not apps.dirac_check(nx.cycle_graph(5))["dirac"]
    assert apps.dirac_check(nx.complete_graph(5))["dirac"]


def test_select_hats_are_far_apart():
    for seed in range(10):
        T = random_bounded_tree(60, 3, seed=seed)
        classes = [[v for v in T if v % 3 == i] for i in range(3)]
        hats = apps.select_hats(T, classes, [1, 1, 1], seed=seed)
        if hats is None:
            continue
        assert apps.check_hats(T, hats)
        for i, h in enumerate(hats):
            for v in h:
                assert all(w in classes[(i - 1) % 3] for w in T[v])


def test_check_hats_detects_distance_two():
    T = nx.path_graph(5)
    assert apps.check_hats(T, [[0], [3]])
    assert not apps.check_hats(T, [[0], [2]])
    assert not apps.check_hats(T, [[1], [1]])


def test_reduced_graph_of_planted_cycle():
    G, c = planted_cycle_host(90, 3, 0.9, k=2, seed=0)
    R, _ = apps.reduced_graph_of(G, 0.25, 0.5, mode="sampled", trials=300, seed=0)
    assert set(R.edges) == {(1, 2), (2, 3), (1, 3)}


@pytest.mark.parametrize("seed", range(4))
def test_dirac_tree_embed_verifies(seed):
    G, c = planted_cycle_host(120, 3, 0.7, k=2, seed=seed)
    T = random_bounded_tree(120, 3, seed=seed)
    res = apps.dirac_tree_embed(G, c, T, seed=seed)
    assert res.phi is not None
    rep = apps.verify_spanning_embedding(G, c, T, res.phi)
    assert rep["ok"]


def test_verify_spanning_embedding_red_cases():
    G, c = planted_cycle_host(120, 3, 0.7, k=2, seed=0)
    T = random_bounded_tree(120, 3, seed=0)
    phi = apps.dirac_tree_embed(G, c, T, seed=0).phi
    bad = dict(phi)
    a, b = 0, 1
    bad[a], bad[b] = phi[b], phi[a]
    rep = apps.verify_spanning_embedding(G, c, T, bad)
    # swapping two images either breaks a tree edge or leaves a valid copy
    assert rep["ok"] == (rep["bijection"] and not rep["edges"] and rep["rainbow"])
    dup = dict(phi)
    dup[0] = phi[1]
    assert not apps.verify_spanning_embedding(G, c, T, dup)["bijection"]


def partial_case(seed, **kw):
    obj = gen_instance("partial", seed, **kw)
    G, c, H, X, Y, R = _partial_inputs(obj)
    return obj, G, c, H, X, Y, R


@pytest.mark.parametrize("seed", range(5))
def test_partial_embed_recheck(seed):
    obj, G, c, H, X, Y, R = partial_case(seed)
    prm = obj["params"]
    res = apps.partial_embed(G, c, H, X, Y, R, prm["mu"], prm["eps"], prm["d_prime"], seed)
    rep = apps.verify_partial_embedding(G, c, H, X, Y, res, prm["d_prime"])
    assert rep["ok"], rep


def test_partial_embed_tamper_detected():
    obj, G, c, H, X, Y, R = partial_case(1)
    prm = obj["params"]
    res = apps.partial_embed(G, c, H, X, Y, R, prm["mu"], prm["eps"], prm["d_prime"], 1)
    y = next(y for i in Y for y in Y[i] if res.S.get(y))
    bad = copy.deepcopy(res)
    bad.S[y] = set()
    assert not apps.verify_partial_embedding(G, c, H, X, Y, bad, prm["d_prime"])["checks"]["ii_candidates"]["ok"]
    x = next(x for i in X for x in X[i])
    wrong_part = next(i for i in range(1, G.r + 1) if x not in X.get(i, []))
    bad = copy.deepcopy(res)
    bad.phi[x] = G.parts[wrong_part][0]
    assert not apps.verify_partial_embedding(G, c, H, X, Y, bad, prm["d_prime"])["checks"]["i_location"]["ok"]


def test_partial_embed_size_precondition():
    obj, G, c, H, X, Y, R = partial_case(0, x_size=10, y_size=10)
    with pytest.raises(InstanceError):
        apps.partial_embed(G, c, H, X, Y, R, obj["params"]["mu"], 0.4, 0.02, 0)


def test_dense_spot_check():
    assert apps.dense_spot_check(nx.complete_graph(40), 0.2, 0.5, seed=0)["ok"]
    sparse = nx.gnp_random_graph(40, 0.1, seed=0)
    rep = apps.dense_spot_check(sparse, 0.25, 0.3, samples=50, seed=0)
    assert not rep["ok"] and rep["witness"]["density"] < 0.3


@pytest.mark.parametrize("seed", range(2))
def test_quasirandom_embed_verifies(seed):
    G, c = random_host(120, 0.8, k=2, seed=seed)
    H = paths_and_cycles(120, seed=seed)
    res = apps.quasirandom_embed(G.to_networkx(), H.to_networkx(), c, seed=seed)
    assert res.phi is not None
    assert res.report["verification"]["ok"]
    for x, y in H.edges:
        assert G.has_edge(res.phi[x], res.phi[y])
