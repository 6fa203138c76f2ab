"""Joint (pattern, target) input: one-hot features plus two adjacency masks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, LabelOutOfRange


@dataclass(frozen=True)
class JointInput:
    """Pattern nodes occupy indices ``[0, pattern_count)``, target nodes the rest.

    ``a_in[i, j] = 1`` when ``j`` sends an edge to ``i`` inside one graph;
    ``a_cr`` adds symmetric virtual edges between same-label pattern/target
    nodes.
    """

    x: np.ndarray
    a_in: np.ndarray
    a_cr: np.ndarray
    pattern_count: int
    directed: bool
    num_labels: int

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def target_count(self) -> int:
        return self.num_nodes - self.pattern_count

    def same_label_pairs(self) -> list[tuple[int, int]]:
        """(pattern index, target index) pairs joined by a virtual edge."""
        p = self.pattern_count
        rows, cols = np.nonzero(self.a_cr[:p, p:])
        return [(int(i), int(j) + p) for i, j in zip(rows, cols)]


def _intra_block(g: Graph) -> np.ndarray:
    # row = receiver: a directed edge tail -> head sets [head, tail]
    return g.adjacency().T.astype(np.float64)


def encode_pair(pattern: Graph, target: Graph, num_labels: int) -> JointInput:
    for g in (pattern, target):
        if any(lab >= num_labels or lab < 0 for lab in g.labels):
            raise LabelOutOfRange(f"label outside alphabet of size {num_labels}")
    if pattern.directed != target.directed:
        raise ValueError("pattern and target disagree on directedness")
    p, t = pattern.num_nodes, target.num_nodes
    n = p + t

    x = np.zeros((n, 2 * num_labels))
    x[np.arange(p), np.asarray(pattern.labels)] = 1.0
    x[p + np.arange(t), num_labels + np.asarray(target.labels)] = 1.0

    a_in = np.zeros((n, n))
    a_in[:p, :p] = _intra_block(pattern)
    a_in[p:, p:] = _intra_block(target)

    a_cr = a_in.copy()
    cross = (np.asarray(pattern.labels)[:, None] == np.asarray(target.labels)[None, :])
    a_cr[:p, p:] = cross
    a_cr[p:, :p] = cross.T
    return JointInput(x, a_in, a_cr, p, pattern.directed, num_labels)


def permute_target(inp: JointInput, perm: np.ndarray) -> JointInput:
    """Relabel target nodes: new target index ``k`` is old target node ``perm[k]``."""
    p = inp.pattern_count
    order = np.concatenate([np.arange(p), p + np.asarray(perm)])
    return JointInput(
        inp.x[order],
        inp.a_in[np.ix_(order, order)],
        inp.a_cr[np.ix_(order, order)],
        p,
        inp.directed,
        inp.num_labels,
    )
