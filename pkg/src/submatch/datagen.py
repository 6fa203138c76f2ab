"""Synthetic targets with prescribed size/degree statistics and balanced query sets.

Targets are a random spanning tree plus extra edges steered by per-node
degree quotas. Positive queries are induced subgraphs of connected node sets
grown from a random seed node; negatives are single perturbations of a
positive (add/remove/rewire an edge, relabel a node) that the exact oracle
certifies have no embedding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .graph import Graph, build_graph, write_graph, read_graph, _is_weakly_connected
from .oracle import find_embedding, verify_mapping, Mapping


class UnsatisfiableStats(ValueError):
    pass


class SizeOutOfRange(ValueError):
    pass


class NegativeGenerationFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class DatasetStats:
    mean_nodes: float
    mean_edges: float
    mean_degree: float
    degree_std: float
    num_labels: int
    directed: bool = False
    max_nodes: int | None = None

    def validate(self) -> None:
        if self.mean_degree < 1:
            raise UnsatisfiableStats(f"mean degree {self.mean_degree} < 1 cannot be connected")
        if self.mean_nodes < 2:
            raise UnsatisfiableStats("need at least two nodes on average")
        if self.mean_edges <= 0 or self.degree_std < 0:
            raise UnsatisfiableStats("edge count must be positive, degree std non-negative")
        if self.num_labels < 1:
            raise UnsatisfiableStats("need at least one label")
        if self.max_nodes is not None and self.max_nodes < 2:
            raise UnsatisfiableStats("max_nodes must be >= 2")

    def scaled(self, max_nodes: int) -> "DatasetStats":
        """Same degree profile with sizes shrunk so that ``|V| <= max_nodes``."""
        mean_nodes = min(self.mean_nodes, max_nodes / 1.5)
        ratio = mean_nodes / self.mean_nodes
        return replace(self, mean_nodes=mean_nodes, mean_edges=self.mean_edges * ratio,
                       max_nodes=max_nodes)

    def as_directed(self) -> "DatasetStats":
        return replace(self, directed=True)


# Size/degree/label statistics of the six benchmark collections. degree_std is
# not published; it is set to half the mean degree.
PRESETS: dict[str, DatasetStats] = {
    "kki": DatasetStats(26.96, 48.42, 3.19, 1.595, 190),
    "cox2": DatasetStats(41.22, 43.45, 2.10, 1.05, 20),
    "cox2_md": DatasetStats(26.28, 335.12, 25.27, 12.635, 36),
    "dhfr": DatasetStats(42.43, 44.54, 2.10, 1.05, 71),
    "dblp_v1": DatasetStats(10.48, 19.65, 3.43, 1.715, 39),
    "msrc_21": DatasetStats(77.52, 198.32, 5.10, 2.55, 141),
}


def stats_from_text(text: str) -> DatasetStats:
    """Parse a flat ``key = value`` stats file."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        raw[k] = v
    allowed = {"mean_nodes", "mean_edges", "mean_degree", "degree_std", "num_labels",
               "directed", "max_nodes"}
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"unknown stats keys: {sorted(unknown)}")
    return DatasetStats(
        mean_nodes=float(raw["mean_nodes"]),
        mean_edges=float(raw.get("mean_edges", float(raw["mean_nodes"]) * float(raw["mean_degree"]) / 2)),
        mean_degree=float(raw["mean_degree"]),
        degree_std=float(raw.get("degree_std", float(raw["mean_degree"]) / 2)),
        num_labels=int(raw["num_labels"]),
        directed=raw.get("directed", "0").lower() in ("1", "true", "yes"),
        max_nodes=int(raw["max_nodes"]) if "max_nodes" in raw else None,
    )


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def orient_by_label(labels, edges) -> list[tuple[int, int]]:
    """Direct each edge from the smaller label to the larger (ties: smaller node id)."""
    out = []
    for u, v in edges:
        if (labels[u], u) > (labels[v], v):
            u, v = v, u
        out.append((u, v))
    return out


def _draw_size(stats: DatasetStats, rng: np.random.Generator) -> int:
    lo = max(2, math.ceil(0.5 * stats.mean_nodes))
    hi = max(lo, math.floor(1.5 * stats.mean_nodes))
    if stats.max_nodes is not None:
        hi = min(hi, stats.max_nodes)
        lo = min(lo, hi)
    n = int(round(rng.normal(stats.mean_nodes, 0.2 * stats.mean_nodes)))
    return int(np.clip(n, lo, hi))


def random_connected_edges(n: int, degree_quota: np.ndarray, rng: np.random.Generator) -> set[tuple[int, int]]:
    """Undirected edge set: spanning tree, then extra edges until quotas are met."""
    quota = np.asarray(degree_quota, dtype=float)
    deg = np.zeros(n)
    edges: set[tuple[int, int]] = set()
    order = rng.permutation(n)
    for k in range(1, n):
        v = order[k]
        earlier = order[:k]
        deficit = np.maximum(quota[earlier] - deg[earlier], 0.0) + 0.05
        u = earlier[rng.choice(k, p=deficit / deficit.sum())]
        edges.add((min(u, v), max(u, v)))
        deg[u] += 1
        deg[v] += 1

    target_edges = max(n - 1, int(round(quota.sum() / 2)))
    target_edges = min(target_edges, n * (n - 1) // 2)
    stalls = 0
    while len(edges) < target_edges and stalls < 20 * n:
        deficit = np.maximum(quota - deg, 0.0) + 0.05
        p = deficit / deficit.sum()
        u, v = rng.choice(n, size=2, replace=False, p=p)
        key = (min(u, v), max(u, v))
        if key in edges:
            stalls += 1
            continue
        edges.add(key)
        deg[u] += 1
        deg[v] += 1
    return edges


def synth_target(stats: DatasetStats, seed) -> Graph:
    stats.validate()
    rng = _rng(seed)
    n = _draw_size(stats, rng)
    quota = np.clip(rng.normal(stats.mean_degree, stats.degree_std, size=n), 1, n - 1)
    edges = random_connected_edges(n, quota, rng)
    labels = rng.integers(0, stats.num_labels, size=n)
    edge_list = sorted(edges)
    if stats.directed:
        edge_list = orient_by_label(labels, edge_list)
    return build_graph(stats.directed, labels, edge_list, stats.num_labels)


def _weak_neighbors(g: Graph) -> list[set[int]]:
    nbrs: list[set[int]] = [set() for _ in range(g.num_nodes)]
    for u, v in g.edges:
        nbrs[u].add(v)
        nbrs[v].add(u)
    return nbrs


def _grow_connected_set(nbrs: list[set[int]], size: int, rng: np.random.Generator) -> list[int]:
    start = int(rng.integers(len(nbrs)))
    chosen = [start]
    in_set = {start}
    frontier = set(nbrs[start])
    while len(chosen) < size:
        cands = sorted(frontier)
        v = cands[int(rng.integers(len(cands)))]
        chosen.append(v)
        in_set.add(v)
        frontier.discard(v)
        frontier.update(w for w in nbrs[v] if w not in in_set)
    return chosen


def sample_positive_query(target: Graph, size: int, seed, degree_goal: float | None = None,
                          tries: int = 8) -> tuple[Graph, Mapping]:
    """Induced subgraph on a connected random node set of ``size`` nodes.

    With ``degree_goal``, ``tries`` node sets are grown and the one whose
    induced mean degree is closest to the goal is kept. Pattern node ids are
    shuffled so that they carry no information about target ids.
    """
    if not 2 <= size <= target.num_nodes:
        raise SizeOutOfRange(f"query size {size} outside [2, {target.num_nodes}]")
    rng = _rng(seed)
    nbrs = _weak_neighbors(target)
    best, best_gap = None, math.inf
    for _ in range(tries if degree_goal is not None else 1):
        nodes = _grow_connected_set(nbrs, size, rng)
        if degree_goal is None:
            best = nodes
            break
        s = set(nodes)
        m = sum(1 for u, v in target.edges if u in s and v in s)
        gap = abs(2 * m / size - degree_goal)
        if gap < best_gap:
            best, best_gap = nodes, gap
    nodes = [best[k] for k in rng.permutation(size)]
    pattern = target.induced_subgraph(nodes)
    mapping = {k: int(v) for k, v in enumerate(nodes)}
    return pattern, mapping


def _edit(kind: str, n: int, labels: list[int], edges: set, absent_labels: list[int],
          rng: np.random.Generator):
    labels, edges = list(labels), set(edges)
    if kind == "relabel":
        if not absent_labels:
            return None
        labels[int(rng.integers(n))] = int(rng.choice(absent_labels))
    elif kind == "add":
        absent = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in edges]
        if not absent:
            return None
        edges.add(absent[int(rng.integers(len(absent)))])
    else:
        present = sorted(edges)
        u, v = present[int(rng.integers(len(present)))]
        edges.discard((u, v))
        if kind == "rewire":
            keep = u if rng.random() < 0.5 else v
            others = [w for w in range(n)
                      if w not in (u, v) and (min(keep, w), max(keep, w)) not in edges]
            if not others:
                return None
            w = others[int(rng.integers(len(others)))]
            edges.add((min(keep, w), max(keep, w)))
    if not edges or not _is_weakly_connected(n, edges):
        return None
    return labels, edges


def _perturb(pattern: Graph, target: Graph, rng: np.random.Generator) -> Graph | None:
    """One random edit on the undirected skeleton; directed graphs are re-oriented by label.

    The edit is adding an edge, moving one endpoint of an edge, or relabelling a
    node to a label the target lacks, tried in random order. Deleting an edge
    is the fallback when none of those applies (e.g. a single-label clique).
    """
    n = pattern.num_nodes
    edges = {(min(u, v), max(u, v)) for u, v in pattern.edges}
    present = set(target.labels)
    absent_labels = [l for l in range(pattern.label_alphabet_size) if l not in present]
    out = None
    for kind in list(rng.permutation(["add", "rewire", "relabel"])) + ["remove"]:
        out = _edit(str(kind), n, list(pattern.labels), edges, absent_labels, rng)
        if out is not None:
            break
    if out is None:
        return None
    labels, edge_set = out
    edge_list = sorted(edge_set)
    if pattern.directed:
        edge_list = orient_by_label(labels, edge_list)
    return build_graph(pattern.directed, labels, edge_list, pattern.label_alphabet_size)


def sample_negative_query(target: Graph, size: int, seed, max_attempts: int = 50,
                          degree_goal: float | None = None) -> Graph:
    """A connected pattern of ``size`` nodes that the oracle certifies is not embedded."""
    if not 2 <= size <= target.num_nodes:
        raise SizeOutOfRange(f"query size {size} outside [2, {target.num_nodes}]")
    rng = _rng(seed)
    for _ in range(max_attempts):
        base, _ = sample_positive_query(target, size, rng, degree_goal)
        cand = _perturb(base, target, rng)
        if cand is not None and find_embedding(cand, target) is None:
            return cand
    raise NegativeGenerationFailed(f"no negative of size {size} after {max_attempts} attempts")


@dataclass
class Sample:
    target: Graph
    pattern: Graph
    label: int
    mapping: Mapping | None = None
    target_path: str | None = None
    query_path: str | None = None

    def check(self) -> bool:
        if self.label == 1:
            return self.mapping is not None and verify_mapping(self.pattern, self.target, self.mapping)
        return find_embedding(self.pattern, self.target) is None


def _sample_seed(master: int, target_id: int, query_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master, target_id, query_id]))


def generate_queries(target: Graph, stats: DatasetStats, count: int, master_seed: int,
                     target_id: int, max_attempts: int = 50) -> list[Sample]:
    """``ceil(count / 2)`` positives then negatives, sizes uniform on [2, |V_T|]."""
    n_pos = (count + 1) // 2
    samples = []
    for q in range(count):
        rng = _sample_seed(master_seed, target_id, q)
        positive = q < n_pos
        for _ in range(20):
            size = int(rng.integers(2, target.num_nodes + 1))
            goal = float(np.clip(rng.normal(stats.mean_degree, stats.degree_std), 1, size - 1))
            if positive:
                pattern, mapping = sample_positive_query(target, size, rng, goal)
                samples.append(Sample(target, pattern, 1, mapping))
                break
            try:
                pattern = sample_negative_query(target, size, rng, max_attempts, goal)
            except NegativeGenerationFailed:
                # some sizes admit no negative (e.g. the whole of a clique); redraw the size
                continue
            samples.append(Sample(target, pattern, 0, None))
            break
        else:
            raise NegativeGenerationFailed(f"target {target_id} query {q}: no negative found")
    return samples


def write_mapping(path, mapping: Mapping) -> None:
    with open(path, "w") as fh:
        for k in sorted(mapping):
            fh.write(f"{k} {mapping[k]}\n")


def read_mapping(path) -> Mapping:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                a, b = line.split()
                out[int(a)] = int(b)
    return out


def build_dataset(stats: DatasetStats, n_targets: int, queries_per_target: int, seed: int,
                  out_dir) -> Path:
    """Write targets, queries, positive mappings and ``manifest.txt``; returns the manifest path."""
    if n_targets < 1 or queries_per_target < 1:
        raise ValueError("counts must be >= 1")
    stats.validate()
    out = Path(out_dir)
    for sub in ("targets", "queries", "mappings"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rows = []
    for t in range(n_targets):
        target = synth_target(stats, np.random.SeedSequence([seed, t, 2**31 - 1]))
        t_rel = f"targets/target_{t}.txt"
        write_graph(out / t_rel, target, graph_id=t)
        for q, sample in enumerate(generate_queries(target, stats, queries_per_target, seed, t)):
            q_rel = f"queries/query_{t}_{q}.txt"
            write_graph(out / q_rel, sample.pattern, graph_id=q)
            row = f"{t_rel} {q_rel} {sample.label}"
            if sample.label == 1:
                m_rel = f"mappings/mapping_{t}_{q}.txt"
                write_mapping(out / m_rel, sample.mapping)
                row += f" {m_rel}"
            rows.append(row)
    manifest = out / "manifest.txt"
    manifest.write_text("\n".join(rows) + "\n")
    (out / "meta.txt").write_text(
        f"num_labels = {stats.num_labels}\ndirected = {int(stats.directed)}\n"
    )
    return manifest


@dataclass
class ManifestRow:
    target_path: Path
    query_path: Path
    label: int
    mapping_path: Path | None


def read_manifest(path) -> list[ManifestRow]:
    path = Path(path)
    base = path.parent
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) not in (3, 4) or parts[2] not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: malformed manifest row")
            mp = base / parts[3] if len(parts) == 4 else None
            rows.append(ManifestRow(base / parts[0], base / parts[1], int(parts[2]), mp))
    return rows


def read_meta(manifest_path) -> dict[str, str]:
    meta = Path(manifest_path).parent / "meta.txt"
    if not meta.exists():
        return {}
    out = {}
    for line in meta.read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def load_samples(manifest_path, num_labels: int) -> list[Sample]:
    cache: dict[Path, Graph] = {}
    samples = []
    for row in read_manifest(manifest_path):
        if row.target_path not in cache:
            cache[row.target_path] = read_graph(row.target_path, num_labels)
        pattern = read_graph(row.query_path, num_labels)
        mapping = read_mapping(row.mapping_path) if row.mapping_path else None
        samples.append(Sample(cache[row.target_path], pattern, row.label, mapping,
                              str(row.target_path), str(row.query_path)))
    return samples
