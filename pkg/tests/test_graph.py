"""Dependency graph features against naive oracles."""

import numpy as np
import pytest

from impactrank.graph import DepGraph, degree_features, pagerank, pagerank_stochastic


def naive_pagerank(nodes, edges, damping, iterations):
    """Straight-line power iteration oracle: explicit loops, no numpy."""
    n = len(nodes)
    index = {node: i for i, node in enumerate(nodes)}
    out_weight = [0.0] * n
    for (src, _), w in edges.items():
        out_weight[index[src]] += w
    rank = [1.0 / n] * n
    for _ in range(iterations):
        incoming = [0.0] * n
        for (src, dst), w in edges.items():
            s = index[src]
            incoming[index[dst]] += rank[s] * w / out_weight[s]
        dangling = sum(rank[i] for i in range(n) if out_weight[i] == 0.0)
        rank = [(1.0 - damping) / n + damping * (incoming[i] + dangling / n) for i in range(n)]
    return rank


def random_graph(rng, max_nodes=30):
    n = rng.integers(1, max_nodes + 1)
    nodes = [f"n{i}" for i in range(n)]
    edges = {}
    for src in range(n):
        for dst in rng.choice(n, size=rng.integers(0, min(n, 6)), replace=False):
            edges[(nodes[src], nodes[int(dst)])] = float(rng.integers(1, 5))
    return DepGraph(nodes=nodes, edges=edges)


def test_three_node_cycle_uniform():
    graph = DepGraph(nodes=["a", "b", "c"], edges={("a", "b"): 1, ("b", "c"): 1, ("c", "a"): 1})
    result = pagerank(graph)
    for score in result.scores.values():
        assert score == pytest.approx(1 / 3, abs=1e-9)
    assert result.converged


def test_two_node_chain_matches_oracle():
    graph = DepGraph(nodes=["a", "b"], edges={("a", "b"): 1.0})
    result = pagerank(graph, damping=0.85, tol=1e-14, max_iter=300)
    oracle = naive_pagerank(graph.nodes, graph.edges, 0.85, 50)
    assert result.scores["a"] == pytest.approx(oracle[0], abs=1e-9)
    assert result.scores["b"] == pytest.approx(oracle[1], abs=1e-9)


def test_single_isolated_node():
    result = pagerank(DepGraph(nodes=["solo"], edges={}))
    assert result.scores["solo"] == pytest.approx(1.0, abs=1e-12)


def test_empty_graph_fatal():
    with pytest.raises(ValueError):
        pagerank(DepGraph(nodes=[], edges={}))


def test_scores_sum_to_one_on_random_graphs():
    rng = np.random.default_rng(7)
    for _ in range(25):
        graph = random_graph(rng)
        result = pagerank(graph)
        total = sum(result.scores.values())
        assert total == pytest.approx(1.0, abs=1e-9)
        assert all(s >= 0 for s in result.scores.values())


def test_permutation_equivariance():
    rng = np.random.default_rng(3)
    graph = random_graph(rng, max_nodes=12)
    base = pagerank(graph, tol=1e-13, max_iter=500).scores

    relabel = {n: f"x{n}" for n in graph.nodes}
    perm = list(np.random.default_rng(5).permutation(graph.nodes))
    permuted = DepGraph(
        nodes=[relabel[n] for n in perm],
        edges={(relabel[s], relabel[d]): w for (s, d), w in graph.edges.items()},
    )
    renamed = pagerank(permuted, tol=1e-13, max_iter=500).scores
    for node in graph.nodes:
        assert renamed[relabel[node]] == pytest.approx(base[node], abs=1e-9)


def test_uniform_cycle_and_complete_graph_are_uniform():
    rng = np.random.default_rng(11)
    for n in rng.integers(2, 15, size=5):
        n = int(n)
        nodes = [f"n{i}" for i in range(n)]
        cycle = {(nodes[i], nodes[(i + 1) % n]): 1.0 for i in range(n)}
        for score in pagerank(DepGraph(nodes, cycle)).scores.values():
            assert score == pytest.approx(1 / n, abs=1e-8)
        complete = {(a, b): 1.0 for a in nodes for b in nodes if a != b}
        for score in pagerank(DepGraph(nodes, complete)).scores.values():
            assert score == pytest.approx(1 / n, abs=1e-8)


def test_degree_features_weighted_edge():
    graph = DepGraph(nodes=["a", "b"], edges={("a", "b"): 3.0})
    feats = degree_features(graph)
    assert feats["a"].out_degree == 1
    assert feats["a"].fan_out == 3.0
    assert feats["b"].in_degree == 1
    assert feats["b"].fan_in == 3.0


def test_degree_features_isolated_node():
    feats = degree_features(DepGraph(nodes=["a"], edges={}))
    assert feats["a"] == type(feats["a"])(0, 0, 0.0, 0.0)


def test_degree_counts_distinct_neighbors():
    # two call names a->b merged into one weighted edge upstream
    graph = DepGraph(nodes=["a", "b"], edges={("a", "b"): 5.0})
    feats = degree_features(graph)
    assert feats["a"].out_degree == 1
    assert feats["a"].fan_out == 5.0


def test_stochastic_pagerank_matches_graph_pagerank():
    rng = np.random.default_rng(23)
    n = 6
    matrix = rng.dirichlet(np.ones(n), size=n)
    vec = pagerank_stochastic(matrix, tol=1e-13, max_iter=500)
    edges = {(f"n{i}", f"n{j}"): matrix[i, j] for i in range(n) for j in range(n)}
    graph = pagerank(DepGraph([f"n{i}" for i in range(n)], edges), tol=1e-13, max_iter=500)
    for i in range(n):
        assert vec[i] == pytest.approx(graph.scores[f"n{i}"], abs=1e-10)
    assert vec.sum() == pytest.approx(1.0, abs=1e-9)
