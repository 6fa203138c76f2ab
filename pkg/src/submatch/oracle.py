"""Exact induced subgraph isomorphism by backtracking.

Pattern nodes are visited in a static order (rarest label in the target
first, then highest pattern degree, then node id). Candidates for a pattern
node are target nodes with the same label and at least the same degree,
tried in ascending id order. Edge presence *and* absence against every
already-mapped pattern node is checked while extending, so every complete
assignment is an induced embedding.
"""
from __future__ import annotations

from collections import Counter
from typing import Iterator

from .graph import Graph


class LabelSpaceMismatch(ValueError):
    pass


Mapping = dict[int, int]


def _check_spaces(pattern: Graph, target: Graph) -> None:
    if pattern.label_alphabet_size != target.label_alphabet_size:
        raise LabelSpaceMismatch(
            f"pattern alphabet {pattern.label_alphabet_size} != "
            f"target alphabet {target.label_alphabet_size}"
        )
    if pattern.directed != target.directed:
        raise LabelSpaceMismatch("cannot match directed against undirected graphs")


def verify_mapping(pattern: Graph, target: Graph, f: Mapping) -> bool:
    """True iff ``f`` is an induced, label-preserving embedding of pattern in target."""
    try:
        if set(f) != set(range(pattern.num_nodes)):
            return False
        image = [f[v] for v in range(pattern.num_nodes)]
    except TypeError:
        return False
    if len(set(image)) != len(image):
        return False
    if not all(0 <= t < target.num_nodes for t in image):
        return False
    for v, t in enumerate(image):
        if pattern.labels[v] != target.labels[t]:
            return False
    for u, v in pattern.edges:
        if not target.has_edge(image[u], image[v]):
            return False
    inverse = {t: v for v, t in enumerate(image)}
    for a, b in target.edges:
        if a in inverse and b in inverse and not pattern.has_edge(inverse[a], inverse[b]):
            return False
    return True


class _Matcher:
    def __init__(self, pattern: Graph, target: Graph):
        _check_spaces(pattern, target)
        self.pattern = pattern
        self.target = target
        self.p_adj = pattern.adjacency()
        self.t_adj = target.adjacency()
        self.directed = pattern.directed

        label_freq = Counter(target.labels)
        p_deg = pattern.degrees()
        self.order = sorted(
            range(pattern.num_nodes),
            key=lambda v: (label_freq[pattern.labels[v]], -int(p_deg[v]), v),
        )

        t_out = self.t_adj.sum(axis=1)
        t_in = self.t_adj.sum(axis=0)
        p_out = self.p_adj.sum(axis=1)
        p_in = self.p_adj.sum(axis=0)
        self.candidates: dict[int, list[int]] = {}
        for v in range(pattern.num_nodes):
            cands = [
                t
                for t in range(target.num_nodes)
                if target.labels[t] == pattern.labels[v]
                and t_out[t] >= p_out[v]
                and t_in[t] >= p_in[v]
            ]
            self.candidates[v] = cands
        # plain lists: scalar indexing into numpy arrays dominates the search otherwise
        self.p_rows = self.p_adj.tolist()
        self.t_rows = self.t_adj.tolist()

    def _consistent(self, v: int, t: int, assigned: list[tuple[int, int]]) -> bool:
        p_adj, t_adj = self.p_rows, self.t_rows
        for u, s in assigned:
            if p_adj[v][u] != t_adj[t][s]:
                return False
            if self.directed and p_adj[u][v] != t_adj[s][t]:
                return False
        return True

    def search(self) -> Iterator[Mapping]:
        if self.pattern.num_nodes > self.target.num_nodes:
            return
        order = self.order
        n = len(order)
        assigned: list[tuple[int, int]] = []
        used = [False] * self.target.num_nodes
        # explicit stack of candidate iterators avoids recursion limits
        stack = [iter(self.candidates[order[0]])]
        while stack:
            depth = len(stack) - 1
            v = order[depth]
            advanced = False
            for t in stack[-1]:
                if used[t] or not self._consistent(v, t, assigned):
                    continue
                assigned.append((v, t))
                used[t] = True
                if depth + 1 == n:
                    yield dict(sorted(assigned))
                    assigned.pop()
                    used[t] = False
                    continue
                stack.append(iter(self.candidates[order[depth + 1]]))
                advanced = True
                break
            if not advanced:
                stack.pop()
                if assigned:
                    _, t = assigned.pop()
                    used[t] = False


def find_embedding(pattern: Graph, target: Graph) -> Mapping | None:
    """First induced embedding in search order, or ``None``."""
    return next(_Matcher(pattern, target).search(), None)


def enumerate_embeddings(pattern: Graph, target: Graph, limit: int | None = None) -> list[Mapping]:
    """All induced embeddings (up to ``limit``) in deterministic search order."""
    if limit is not None and limit < 1:
        raise ValueError("limit must be >= 1")
    out = []
    for f in _Matcher(pattern, target).search():
        out.append(f)
        if limit is not None and len(out) >= limit:
            break
    return out


def is_subgraph(pattern: Graph, target: Graph) -> bool:
    return find_embedding(pattern, target) is not None
