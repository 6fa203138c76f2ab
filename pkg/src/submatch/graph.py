"""Labelled connected graphs and their text serialization.

Text format, one graph per block::

    t <graph_id> <num_nodes> <num_edges> <directed:0|1>
    v <node_id> <label_id>      (num_nodes lines, ids 0..n-1 in order)
    e <tail> <head>             (num_edges lines)

Lines starting with ``#`` are comments.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    pass


class Disconnected(GraphError):
    pass


class IsolatedNode(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class LabelOutOfRange(GraphError):
    pass


class GraphSyntaxError(GraphError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Graph:
    """Immutable labelled graph; build instances with :func:`build_graph`.

    Undirected edges are stored as ``(min, max)``. ``label_alphabet_size``
    bounds the label ids (every label is strictly below it).
    """

    directed: bool
    labels: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    label_alphabet_size: int

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        if self.directed:
            return (u, v) in self.edges
        return (min(u, v), max(u, v)) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def out_neighbors(self) -> list[list[int]]:
        """Successor lists (all neighbours for undirected graphs), ascending."""
        nbrs: list[list[int]] = [[] for _ in self.labels]
        for u, v in self.sorted_edges():
            nbrs[u].append(v)
            if not self.directed:
                nbrs[v].append(u)
        return [sorted(n) for n in nbrs]

    def in_neighbors(self) -> list[list[int]]:
        if not self.directed:
            return self.out_neighbors()
        nbrs: list[list[int]] = [[] for _ in self.labels]
        for u, v in self.sorted_edges():
            nbrs[v].append(u)
        return [sorted(n) for n in nbrs]

    def degrees(self) -> np.ndarray:
        """Total degree per node (in + out for directed graphs)."""
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 matrix with ``adj[u, v] = 1`` for edge ``u -> v``."""
        adj = np.zeros((self.num_nodes, self.num_nodes), dtype=np.int8)
        for u, v in self.edges:
            adj[u, v] = 1
            if not self.directed:
                adj[v, u] = 1
        return adj

    def induced_subgraph(self, nodes: Sequence[int]) -> "Graph":
        """Subgraph induced by ``nodes``; node ``nodes[k]`` becomes node ``k``."""
        index = {v: k for k, v in enumerate(nodes)}
        edges = []
        for u, v in self.edges:
            if u in index and v in index:
                edges.append((index[u], index[v]))
        return build_graph(
            self.directed,
            [self.labels[v] for v in nodes],
            edges,
            label_alphabet_size=self.label_alphabet_size,
        )


def _is_weakly_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for w in nbrs[u]:
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == n


def build_graph(
    directed: bool,
    labels: Sequence[int],
    edges: Iterable[tuple[int, int]],
    label_alphabet_size: int | None = None,
) -> Graph:
    """Validate and construct a :class:`Graph`.

    ``label_alphabet_size`` defaults to ``max(labels) + 1``.
    """
    labels = tuple(int(x) for x in labels)
    n = len(labels)
    if n < 1:
        raise GraphError("graph needs at least one node")
    if label_alphabet_size is None:
        label_alphabet_size = max(labels) + 1
    for lab in labels:
        if lab < 0 or lab >= label_alphabet_size:
            raise LabelOutOfRange(f"label {lab} outside [0, {label_alphabet_size})")

    stored: set[tuple[int, int]] = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) references a missing node")
        if u == v:
            raise SelfLoop(f"self-loop on node {u}")
        key = (u, v) if directed else (min(u, v), max(u, v))
        if key in stored:
            raise DuplicateEdge(f"duplicate edge {key}")
        stored.add(key)

    # with two or more nodes, connectivity already implies degree >= 1
    if n == 1:
        raise IsolatedNode("node 0 has no incident edge")
    if not _is_weakly_connected(n, stored):
        raise Disconnected("graph is not connected")

    return Graph(directed, labels, frozenset(stored), int(label_alphabet_size))


def degree_stats(g: Graph) -> tuple[float, float, int, int]:
    """Return ``(mean degree, degree std, node count, edge count)``."""
    deg = g.degrees().astype(float)
    return float(deg.mean()), float(deg.std()), g.num_nodes, g.num_edges


def serialize_graph(g: Graph, graph_id: int = 0) -> str:
    lines = [f"t {graph_id} {g.num_nodes} {g.num_edges} {int(g.directed)}"]
    lines += [f"v {i} {lab}" for i, lab in enumerate(g.labels)]
    lines += [f"e {u} {v}" for u, v in g.sorted_edges()]
    return "\n".join(lines) + "\n"


def parse_graphs(text: str, label_alphabet_size: int | None = None) -> list[Graph]:
    """Parse every graph block in ``text``."""
    blocks: list[dict] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        kind = parts[0]
        try:
            args = [int(x) for x in parts[1:]]
        except ValueError:
            raise GraphSyntaxError(f"non-integer field in {line!r}", lineno) from None
        if kind == "t":
            if len(args) != 4 or args[3] not in (0, 1):
                raise GraphSyntaxError("expected 't <id> <nodes> <edges> <0|1>'", lineno)
            blocks.append(dict(header=args, lineno=lineno, labels=[], edges=[]))
            continue
        if not blocks:
            raise GraphSyntaxError("record before any 't' header", lineno)
        block = blocks[-1]
        n_nodes = block["header"][1]
        if kind == "v":
            if len(args) != 2:
                raise GraphSyntaxError("expected 'v <node> <label>'", lineno)
            if args[0] != len(block["labels"]):
                raise GraphSyntaxError(f"node ids must be consecutive, got {args[0]}", lineno)
            if args[0] >= n_nodes:
                raise GraphSyntaxError("more nodes than declared", lineno)
            block["labels"].append(args[1])
        elif kind == "e":
            if len(args) != 2:
                raise GraphSyntaxError("expected 'e <tail> <head>'", lineno)
            if not all(0 <= x < len(block["labels"]) for x in args):
                raise GraphSyntaxError(f"edge {args} references a missing node", lineno)
            block["edges"].append(tuple(args))
        else:
            raise GraphSyntaxError(f"unknown record type {kind!r}", lineno)

    graphs = []
    for block in blocks:
        _, n_nodes, n_edges, directed = block["header"]
        if len(block["labels"]) != n_nodes:
            raise GraphSyntaxError(
                f"declared {n_nodes} nodes, found {len(block['labels'])}", block["lineno"]
            )
        if len(block["edges"]) != n_edges:
            raise GraphSyntaxError(
                f"declared {n_edges} edges, found {len(block['edges'])}", block["lineno"]
            )
        graphs.append(
            build_graph(bool(directed), block["labels"], block["edges"], label_alphabet_size)
        )
    return graphs


def parse_graph(text: str, label_alphabet_size: int | None = None) -> Graph:
    graphs = parse_graphs(text, label_alphabet_size)
    if len(graphs) != 1:
        raise GraphSyntaxError(f"expected one graph, found {len(graphs)}")
    return graphs[0]


def read_graph(path, label_alphabet_size: int | None = None) -> Graph:
    with open(path) as fh:
        return parse_graph(fh.read(), label_alphabet_size)


def write_graph(path, g: Graph, graph_id: int = 0) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_graph(g, graph_id))
