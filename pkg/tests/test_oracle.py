import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from submatch.graph import build_graph
from submatch.oracle import (
    LabelSpaceMismatch, enumerate_embeddings, find_embedding, verify_mapping,
)
from conftest import brute_force_embeddings, random_connected_graph

A, B, C = 0, 1, 2


def k4(label=0, alphabet=1):
    return build_graph(False, [label] * 4, [(i, j) for i in range(4) for j in range(i + 1, 4)], alphabet)


def test_single_node_pattern():
    pattern = build_graph(False, [A, B], [(0, 1)], 3)
    target = build_graph(False, [C, A, B], [(0, 1), (1, 2)], 3)
    f = find_embedding(pattern, target)
    assert f == {0: 1, 1: 2}


def test_path_not_in_triangle():
    path = build_graph(False, [A, B, C], [(0, 1), (1, 2)], 3)
    tri = build_graph(False, [A, B, C], [(0, 1), (1, 2), (0, 2)], 3)
    assert find_embedding(path, tri) is None
    assert not verify_mapping(path, tri, {0: 0, 1: 1, 2: 2})


def test_triangle_in_k4():
    tri = build_graph(False, [0, 0, 0], [(0, 1), (1, 2), (0, 2)], 1)
    assert find_embedding(tri, k4()) is not None


def test_triangle_in_k4_count_matches_brute_force():
    tri = build_graph(False, [0, 0, 0], [(0, 1), (1, 2), (0, 2)], 1)
    expected = brute_force_embeddings(tri, k4())
    assert len(expected) == 24
    got = enumerate_embeddings(tri, k4(), limit=100)
    assert len(got) == 24
    assert sorted(map(sorted, (f.items() for f in got))) == sorted(map(sorted, (f.items() for f in expected)))


def test_identity_pair_unique():
    g = build_graph(False, [A, B], [(0, 1)], 2)
    assert enumerate_embeddings(g, g) == [{0: 0, 1: 1}]
    assert verify_mapping(g, g, {0: 0, 1: 1})


def test_non_isomorphic_empty():
    p = build_graph(False, [A, A], [(0, 1)], 2)
    t = build_graph(False, [A, B], [(0, 1)], 2)
    assert enumerate_embeddings(p, t) == []


def test_label_violation_rejected():
    g = build_graph(False, [A, B], [(0, 1)], 2)
    assert not verify_mapping(g, g, {0: 1, 1: 0})


@pytest.mark.parametrize("f", [{0: 0}, {0: 0, 1: 0}, {0: 0, 1: 5}, {0: 0, 1: 1, 2: 2}])
def test_malformed_mappings_false(f):
    g = build_graph(False, [A, A], [(0, 1)], 1)
    assert not verify_mapping(g, g, f)


def test_limit():
    tri = build_graph(False, [0, 0, 0], [(0, 1), (1, 2), (0, 2)], 1)
    assert len(enumerate_embeddings(tri, k4(), limit=5)) == 5


def test_deterministic():
    rng = np.random.default_rng(0)
    t = random_connected_graph(rng, 8, 2)
    u, v = t.sorted_edges()[0]
    p = t.induced_subgraph([u, v])
    assert enumerate_embeddings(p, t) == enumerate_embeddings(p, t)


def test_label_space_mismatch():
    p = build_graph(False, [0, 0], [(0, 1)], 1)
    with pytest.raises(LabelSpaceMismatch):
        find_embedding(p, k4(alphabet=2))


def test_directed_orientation_matters():
    p = build_graph(True, [A, B], [(0, 1)], 2)
    t = build_graph(True, [A, B], [(1, 0)], 2)
    assert find_embedding(p, t) is None
    t2 = build_graph(True, [A, B, B], [(1, 0), (0, 2)], 2)
    assert find_embedding(p, t2) == {0: 0, 1: 2}


def test_directed_induced_extra_reverse_edge():
    p = build_graph(True, [A, A], [(0, 1)], 1)
    t = build_graph(True, [A, A], [(0, 1), (1, 0)], 1)
    assert find_embedding(p, t) is None


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(2, 8), st.integers(1, 3), st.booleans())
def test_agrees_with_brute_force(seed, p_n, t_n, alphabet, directed):
    rng = np.random.default_rng(seed)
    p_n = min(p_n, t_n)
    target = random_connected_graph(rng, t_n, alphabet, directed, extra_p=float(rng.uniform(0, 0.6)))
    pattern = random_connected_graph(rng, p_n, alphabet, directed, extra_p=float(rng.uniform(0, 0.6)))
    expected = brute_force_embeddings(pattern, target)
    got = enumerate_embeddings(pattern, target)
    assert {tuple(sorted(f.items())) for f in got} == {tuple(sorted(f.items())) for f in expected}
    assert len(got) == len(expected)
    assert (find_embedding(pattern, target) is None) == (not expected)
    assert all(verify_mapping(pattern, target, f) for f in got)
