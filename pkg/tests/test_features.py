import itertools
import math
import statistics

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokennet.errors import GraphError
from tokennet.features import (
    FEATURE_DIRECTIONS,
    FEATURE_NAMES,
    Partition,
    count_components,
    degree_centrality_std,
    detect_communities,
    largest_component_ratio,
    modularity,
    topological_features,
)
from tokennet.ingest import DailyGraph

from conftest import DAY, addr, clique, graph


def brute_modularity(edges, labels):
    """Direct Newman sum over node pairs: (1/2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j)."""
    n = len(labels)
    m = len(edges)
    adj = [[0] * n for _ in range(n)]
    for a, b in edges:
        adj[a][b] = adj[b][a] = 1
    k = [sum(row) for row in adj]
    q = 0.0
    for i in range(n):
        for j in range(n):
            if labels[i] == labels[j]:
                q += adj[i][j] - k[i] * k[j] / (2 * m)
    return q / (2 * m)


def set_partitions(n):
    """All partitions of range(n) as restricted growth strings."""
    def rec(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for c in range(top + 2):
            yield from rec(prefix + [c], max(top, c))
    yield from rec([0], 0)


def nx_graph(g: DailyGraph):
    G = nx.Graph()
    G.add_nodes_from(range(g.n_nodes))
    G.add_edges_from(zip(g.u.tolist(), g.v.tolist()))
    return G


TWO_TRIANGLES = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
BRIDGED_K5 = clique(range(5)) + clique(range(5, 10)) + [(4, 5)]


def test_exhaustive_oracle_two_triangles():
    best = max(set_partitions(6), key=lambda p: brute_modularity(TWO_TRIANGLES, p))
    assert best == (0, 0, 0, 1, 1, 1)
    assert brute_modularity(TWO_TRIANGLES, best) == pytest.approx(0.5, abs=1e-12)


def test_exhaustive_oracle_bridged_cliques():
    two_parts = [(0,) + bits for bits in itertools.product((0, 1), repeat=9)]
    best = max(two_parts, key=lambda p: brute_modularity(BRIDGED_K5, p))
    assert best == (0,) * 5 + (1,) * 5
    assert brute_modularity(BRIDGED_K5, best) == pytest.approx(20 / 21 - 0.5, abs=1e-12)


def test_components(two_triangles, star5):
    assert count_components(two_triangles) == 2
    assert count_components(star5) == 1
    assert count_components(graph([(0, 1), (2, 3), (4, 5)])) == 3


def test_largest_component_ratio(two_triangles, star5):
    assert largest_component_ratio(two_triangles) == 0.5
    assert largest_component_ratio(star5) == 1.0
    assert largest_component_ratio(graph([(0, 1), (1, 2), (0, 2), (3, 4)])) == 0.6


def test_empty_graph_rejected():
    empty = DailyGraph.from_edges(DAY, [], [])
    with pytest.raises(GraphError):
        count_components(empty)
    with pytest.raises(GraphError):
        largest_component_ratio(empty)


def test_detect_two_triangles(two_triangles):
    p = detect_communities(two_triangles, seed=0)
    assert sorted(map(sorted, p.groups())) == [[0, 1, 2], [3, 4, 5]]


def test_detect_bridged_cliques():
    g = graph(BRIDGED_K5)
    for seed in range(5):
        p = detect_communities(g, seed)
        assert sorted(map(sorted, p.groups())) == [list(range(5)), list(range(5, 10))]
        assert modularity(g, p) == pytest.approx(20 / 21 - 0.5, abs=1e-12)


def test_detect_single_edge_not_worse_than_singletons():
    g = graph([(0, 1)])
    p = detect_communities(g, 0)
    assert modularity(g, p) >= modularity(g, Partition(np.array([0, 1])))


def test_partition_ids_dense():
    p = detect_communities(graph(BRIDGED_K5), 3)
    assert sorted(set(p.community_of.tolist())) == list(range(p.n_communities))


def test_modularity_examples(two_triangles, triangle):
    assert modularity(two_triangles, Partition(np.array([0, 0, 0, 1, 1, 1]))) == pytest.approx(0.5, abs=1e-12)
    assert modularity(two_triangles, Partition(np.zeros(6, dtype=int))) == pytest.approx(0.0, abs=1e-15)
    assert modularity(triangle, Partition(np.array([0, 1, 2]))) == pytest.approx(-1 / 3, abs=1e-12)


def test_modularity_no_edges():
    g = DailyGraph.from_edges(DAY, [addr(0)], [])
    with pytest.raises(GraphError, match="undefined modularity"):
        modularity(g, Partition(np.array([0])))


def test_degree_centrality_std_examples(path3, star5):
    cycle = graph([(0, 1), (1, 2), (2, 3), (3, 0)])
    assert degree_centrality_std(cycle) == 0.0
    assert degree_centrality_std(path3) == pytest.approx(math.sqrt(1 / 18), abs=1e-12)
    assert degree_centrality_std(star5) == pytest.approx(0.3, abs=1e-12)


def test_feature_directions_cover_all_features():
    assert set(FEATURE_DIRECTIONS) == set(FEATURE_NAMES)
    assert set(FEATURE_DIRECTIONS.values()) == {"↑", "↓"}


# -- independent-oracle and property checks ---------------------------------


@st.composite
def random_graphs(draw, max_n=14):
    n = draw(st.integers(2, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, unique=True))
    used = sorted({x for e in chosen for x in e})
    remap = {x: i for i, x in enumerate(used)}
    return graph([(remap[a], remap[b]) for a, b in chosen], n=len(used))


@settings(max_examples=80, deadline=None)
@given(random_graphs(), st.integers(0, 2**31))
def test_features_match_networkx(g, seed):
    G = nx_graph(g)
    assert count_components(g) == nx.number_connected_components(G)
    assert largest_component_ratio(g) == pytest.approx(
        max(len(c) for c in nx.connected_components(G)) / g.n_nodes, abs=1e-15)
    assert degree_centrality_std(g) == pytest.approx(
        statistics.pstdev(nx.degree_centrality(G).values()), abs=1e-12)
    p = detect_communities(g, seed)
    q = modularity(g, p)
    assert q == pytest.approx(nx.community.modularity(G, [set(x) for x in p.groups()]), abs=1e-12)
    assert q == pytest.approx(brute_modularity(list(zip(g.u.tolist(), g.v.tolist())), p.community_of.tolist()), abs=1e-12)
    assert -0.5 <= q <= 1.0
    # never worse than lumping everything together
    assert q >= modularity(g, Partition(np.zeros(g.n_nodes, dtype=int))) - 1e-12
    assert (count_components(g) == 1) == (largest_component_ratio(g) == 1.0)


@settings(max_examples=40, deadline=None)
@given(random_graphs(), st.randoms(use_true_random=False), st.integers(0, 100))
def test_features_invariant_to_node_numbering_and_weights(g, rnd, seed):
    perm = list(range(g.n_nodes))
    rnd.shuffle(perm)
    inv = {old: new for new, old in enumerate(perm)}
    addresses = [g.addresses[old] for old in perm]
    edges = [(inv[a], inv[b]) for a, b in zip(g.u.tolist(), g.v.tolist())]
    weights = [rnd.randint(1, 10**20) for _ in edges]
    h = DailyGraph.from_edges(DAY, addresses, edges, weights=weights)
    assert topological_features(g, seed) == topological_features(h, seed)


def test_detect_is_seed_deterministic():
    G = nx.gnm_random_graph(200, 600, seed=5)
    g = graph(list(G.edges()), n=200)
    a = detect_communities(g, 42).community_of
    b = detect_communities(g, 42).community_of
    assert (a == b).all()
    assert modularity(g, detect_communities(g, 42)) > 0.3
