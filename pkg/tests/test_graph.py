from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from submatch.graph import (
    Disconnected, DuplicateEdge, GraphSyntaxError, IsolatedNode, LabelOutOfRange, SelfLoop,
    build_graph, degree_stats, parse_graph, parse_graphs, serialize_graph,
)
from conftest import random_connected_graph


def test_single_isolated_node_rejected():
    with pytest.raises(IsolatedNode):
        build_graph(False, [0], [])


def test_minimal_edge():
    g = build_graph(False, [0, 1], [(0, 1)])
    assert g.num_nodes == 2 and g.num_edges == 1


def test_disconnected():
    with pytest.raises(Disconnected):
        build_graph(False, [0, 1, 2], [(0, 1)])


@pytest.mark.parametrize(
    "edges, exc",
    [([(0, 1), (1, 0)], DuplicateEdge), ([(0, 1), (1, 1)], SelfLoop)],
)
def test_bad_edges(edges, exc):
    with pytest.raises(exc):
        build_graph(False, [0, 1], edges)


def test_directed_reverse_pair_is_not_duplicate():
    g = build_graph(True, [0, 1], [(0, 1), (1, 0)])
    assert g.num_edges == 2


def test_label_out_of_range():
    with pytest.raises(LabelOutOfRange):
        build_graph(False, [0, 3], [(0, 1)], label_alphabet_size=3)


def test_undirected_edges_canonical():
    g = build_graph(False, [0, 0], [(1, 0)])
    assert g.edges == frozenset({(0, 1)})


def test_parse_example():
    g = parse_graph("t 0 2 1 0\nv 0 5\nv 1 7\ne 0 1")
    assert not g.directed
    assert g.labels == (5, 7)
    assert g.edges == frozenset({(0, 1)})


def test_parse_missing_node():
    with pytest.raises(GraphSyntaxError) as info:
        parse_graph("t 0 2 1 0\nv 0 5\nv 1 7\ne 0 9")
    assert info.value.lineno == 4


def test_parse_comments_and_multiple_blocks():
    text = "# header\nt 0 2 1 1\nv 0 0\nv 1 1\ne 1 0\n#x\nt 1 2 1 0\nv 0 1\nv 1 1\ne 0 1\n"
    gs = parse_graphs(text)
    assert len(gs) == 2
    assert gs[0].directed and gs[0].edges == frozenset({(1, 0)})


def test_parse_count_mismatch():
    with pytest.raises(GraphSyntaxError):
        parse_graph("t 0 3 1 0\nv 0 5\nv 1 7\ne 0 1")


@pytest.mark.parametrize("directed", [False, True])
def test_round_trip_random(directed):
    rng = np.random.default_rng(3)
    g = random_connected_graph(rng, 10, 6, directed)
    assert parse_graph(serialize_graph(g), g.label_alphabet_size) == g
    assert serialize_graph(parse_graph(serialize_graph(g), 6)) == serialize_graph(g)


@pytest.mark.parametrize(
    "labels, edges, mean",
    [
        ([0, 0, 0], [(0, 1), (1, 2), (0, 2)], 2.0),
        ([0, 0], [(0, 1)], 1.0),
        ([0] * 5, [(0, 1), (0, 2), (0, 3), (0, 4)], 1.6),
    ],
)
def test_degree_stats(labels, edges, mean):
    m, sd, n, e = degree_stats(build_graph(False, labels, edges))
    assert m == pytest.approx(mean)
    assert (n, e) == (len(labels), len(edges))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2**31), st.integers(2, 14), st.booleans())
def test_bfs_reaches_every_node(seed, n, directed):
    g = random_connected_graph(np.random.default_rng(seed), n, 4, directed)
    nbrs = [set() for _ in range(n)]
    for u, v in g.edges:
        nbrs[u].add(v)
        nbrs[v].add(u)
    seen, queue = {0}, deque([0])
    while queue:
        for w in nbrs[queue.popleft()]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    assert len(seen) == n
    assert degree_stats(g)[3] == len(g.edges)
    assert parse_graph(serialize_graph(g), 4) == g
