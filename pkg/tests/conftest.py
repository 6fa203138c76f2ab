import itertools

import numpy as np
import pytest

from submatch.graph import build_graph


def brute_force_embeddings(pattern, target):
    """Every injective map checked directly against the three induced conditions."""
    found = []
    p, t = pattern.num_nodes, target.num_nodes
    for image in itertools.permutations(range(t), p):
        if any(pattern.labels[v] != target.labels[image[v]] for v in range(p)):
            continue
        ok = True
        for u in range(p):
            for v in range(p):
                if u == v:
                    continue
                if pattern.has_edge(u, v) != target.has_edge(image[u], image[v]):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            found.append(dict(enumerate(image)))
    return found


def random_connected_graph(rng, n, num_labels, directed=False, extra_p=0.3):
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        u, v = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(u, v), max(u, v)))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < extra_p:
                edges.add((u, v))
    if directed:
        edges = {(v, u) if rng.random() < 0.5 else (u, v) for u, v in edges}
    labels = rng.integers(0, num_labels, size=n)
    return build_graph(directed, labels, sorted(edges), num_labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: list[str] = []


def record_criterion(name, ok, detail=""):
    """Print and remember one acceptance line; the terminal summary repeats them all."""
    line = f"{'PASS' if ok else 'FAIL'}  criterion {name}: {detail}"
    print(line)
    _CRITERIA.append(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
