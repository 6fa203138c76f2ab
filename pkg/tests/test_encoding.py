import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from submatch.encoding import encode_pair, permute_target
from submatch.graph import LabelOutOfRange, build_graph
from conftest import random_connected_graph

A, B = 0, 1


def test_worked_example():
    pattern = build_graph(False, [A, B], [(0, 1)], 2)
    target = build_graph(False, [A, B, B], [(0, 1), (1, 2)], 2)
    inp = encode_pair(pattern, target, 2)
    assert inp.num_nodes == 5 and inp.pattern_count == 2
    np.testing.assert_array_equal(inp.x, [
        [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 0, 1],
    ])
    cross = {(int(i), int(j)) for i, j in zip(*np.nonzero(inp.a_cr[:2, 2:]))}
    assert cross == {(0, 0), (1, 1), (1, 2)}
    np.testing.assert_array_equal(inp.a_cr[2:, :2], inp.a_cr[:2, 2:].T)
    assert not inp.a_in[:2, 2:].any() and not inp.a_in[2:, :2].any()
    assert inp.same_label_pairs() == [(0, 2), (1, 3), (1, 4)]


def test_no_shared_labels():
    pattern = build_graph(False, [0, 0], [(0, 1)], 3)
    target = build_graph(False, [1, 2], [(0, 1)], 3)
    inp = encode_pair(pattern, target, 3)
    np.testing.assert_array_equal(inp.a_cr, inp.a_in)


def test_self_pair_cross_block_is_identity():
    g = build_graph(False, [2, 0, 1, 3], [(0, 1), (1, 2), (2, 3)], 4)
    inp = encode_pair(g, g, 4)
    np.testing.assert_array_equal(inp.a_cr[:4, 4:], np.eye(4))


def test_label_out_of_range():
    g = build_graph(False, [0, 3], [(0, 1)])
    with pytest.raises(LabelOutOfRange):
        encode_pair(g, g, 3)


def test_directed_row_is_receiver():
    g = build_graph(True, [0, 1], [(0, 1)], 2)
    inp = encode_pair(g, g, 2)
    assert inp.a_in[1, 0] == 1 and inp.a_in[0, 1] == 0
    # virtual edges stay symmetric
    np.testing.assert_array_equal(inp.a_cr[:2, 2:], inp.a_cr[2:, :2].T)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_structural_invariants(seed, directed):
    rng = np.random.default_rng(seed)
    p = random_connected_graph(rng, int(rng.integers(2, 6)), 3, directed)
    t = random_connected_graph(rng, int(rng.integers(2, 9)), 3, directed)
    inp = encode_pair(p, t, 3)
    n_p = p.num_nodes
    np.testing.assert_array_equal(inp.x.sum(axis=1), 1)
    assert inp.x[:n_p, 3:].sum() == 0 and inp.x[n_p:, :3].sum() == 0
    assert not np.diag(inp.a_in).any() and not np.diag(inp.a_cr).any()
    np.testing.assert_array_equal(inp.a_cr[:n_p, :n_p], inp.a_in[:n_p, :n_p])
    np.testing.assert_array_equal(inp.a_cr[n_p:, n_p:], inp.a_in[n_p:, n_p:])
    if not directed:
        np.testing.assert_array_equal(inp.a_in, inp.a_in.T)
        np.testing.assert_array_equal(inp.a_cr, inp.a_cr.T)
    perm = rng.permutation(t.num_nodes)
    q = permute_target(inp, perm)
    relabelled = t.induced_subgraph(list(perm))
    np.testing.assert_array_equal(q.a_cr, encode_pair(p, relabelled, 3).a_cr)
