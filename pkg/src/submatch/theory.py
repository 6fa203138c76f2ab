"""Numerical checks of the diffusion truncation bound and teleport convergence.

Operators are recovered by diffusing the identity feature matrix, so no
inverse of the projected features is ever needed.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .glema import diffuse, uniform_diffusion


def error_bound(alpha: float, k: int) -> float:
    return (1.0 - alpha) ** (k + 1)


def random_attention(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.15) -> np.ndarray:
    """Row-stochastic attention supported on a random connected undirected graph."""
    mask = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):
        u, v = order[k], order[int(rng.integers(k))]
        mask[u, v] = mask[v, u] = 1
    extra = np.triu(rng.random((n, n)) < extra_edge_prob, 1)
    mask = np.maximum(mask, extra + extra.T)
    if n == 1:
        mask[0, 0] = 1
    logits = Tensor(rng.normal(scale=2.0, size=(n, n)))
    return ad.masked_softmax_rows(logits, mask).data


def diffusion_operator(a1: np.ndarray, alpha: float, k: int) -> np.ndarray:
    return uniform_diffusion(a1, np.eye(a1.shape[0]), alpha, k)


@dataclass
class BoundCheck:
    n: int
    alpha: float
    k: int
    empirical: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound + 1e-12


def check_error_bound(n: int, alpha: float, k: int, horizon: int = 500, seed=0,
                      a1: np.ndarray | None = None) -> BoundCheck:
    """Mean absolute entrywise gap between the K-step and ``horizon``-step operators."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if a1 is None:
        a1 = random_attention(n, np.random.default_rng(seed))
    ref = diffusion_operator(a1, alpha, horizon)
    approx = diffusion_operator(a1, alpha, k)
    err = float(np.abs(ref - approx).mean())
    return BoundCheck(a1.shape[0], alpha, k, err, error_bound(alpha, k))


def check_uniform_reduction(a1: np.ndarray, xp: np.ndarray, alpha: float, k: int) -> float:
    """Max abs gap between per-node diffusion with constant beta and the scalar recurrence."""
    beta = Tensor(np.full((a1.shape[0], 1), alpha))
    z = diffuse(Tensor(a1), Tensor(xp), beta, k).data
    return float(np.abs(z - uniform_diffusion(a1, xp, alpha, k)).max())


@dataclass
class FixedPointCheck:
    contraction_ratio: float
    bound: float
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.contraction_ratio <= self.bound + 1e-9 and self.residual <= self.tolerance


def check_fixed_point(a1: np.ndarray, xp: np.ndarray, beta: np.ndarray, tolerance: float = 1e-10,
                      horizon: int = 200) -> FixedPointCheck:
    """Iterate the per-node recurrence; report the worst step-to-step contraction and
    the fixed-point residual of the final iterate.

    Ratios are taken only while the step exceeds ``1e-5`` of the feature
    scale; below that, roundoff in the step itself (~1e-16 relative) would
    move the ratio by more than the 1e-9 slack.
    """
    beta = np.asarray(beta, dtype=np.float64).reshape(-1, 1)
    stay = 1.0 - beta
    restart = beta * xp
    scale = max(1.0, float(np.abs(xp).max()))
    z = xp
    prev_step = None
    worst = 0.0
    for _ in range(horizon):
        nxt = stay * (a1 @ z) + restart
        step = float(np.abs(nxt - z).max())
        if prev_step is not None and prev_step > 1e-5 * scale:
            worst = max(worst, step / prev_step)
        prev_step = step
        z = nxt
    residual = float(np.abs(z - (stay * (a1 @ z) + restart)).max())
    return FixedPointCheck(worst, float(stay.max()), residual, tolerance)


def commutation_gap(a1: np.ndarray, beta: np.ndarray) -> float:
    """``max |diag(1-beta) A - A diag(1-beta)|``; zero only when beta is constant on the support."""
    d = np.diag(1.0 - np.asarray(beta, dtype=np.float64).reshape(-1))
    return float(np.abs(d @ a1 - a1 @ d).max())


def series_operator(a1: np.ndarray, beta: np.ndarray, terms: int = 400) -> np.ndarray:
    """Truncated ``sum_k diag(beta (1-beta)^k) A^k`` (node-wise geometric hop weights)."""
    beta = np.asarray(beta, dtype=np.float64).reshape(-1, 1)
    out = np.zeros_like(a1)
    power = np.eye(a1.shape[0])
    for k in range(terms):
        out += beta * (1 - beta) ** k * power
        power = power @ a1
    return out


def bound_curve(alphas, ks, sizes=(10, 25, 50), seeds=range(3), horizon: int = 500) -> list[dict]:
    """One row per (alpha, K): analytic bound and the worst empirical error over instances."""
    rows = []
    instances = [random_attention(n, np.random.default_rng([s, n])) for n in sizes for s in seeds]
    for alpha in alphas:
        refs = [diffusion_operator(a, alpha, horizon) for a in instances]
        for k in ks:
            worst = max(
                float(np.abs(ref - diffusion_operator(a, alpha, k)).mean())
                for a, ref in zip(instances, refs)
            )
            rows.append(dict(alpha=float(alpha), K=int(k), bound=error_bound(alpha, k), empirical_err=worst))
    return rows


def emit_bound_curve(alphas, ks, path=None, **kwargs) -> str:
    """CSV ``alpha,K,bound,empirical_err``; written to ``path`` when given."""
    alphas, ks = list(alphas), list(ks)
    if not alphas or not ks:
        raise ValueError("alpha and K grids must be nonempty")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "K", "bound", "empirical_err"])
    for r in bound_curve(alphas, ks, **kwargs):
        w.writerow([f"{r['alpha']:.6g}", r["K"], repr(r["bound"]), repr(r["empirical_err"])])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------- sweeps


def bound_sweep(n_graphs: int = 100, max_nodes: int = 50, alphas=(0.3, 0.5, 0.7), ks=range(3, 11),
                horizon: int = 500, seed: int = 0) -> list[BoundCheck]:
    rng = np.random.default_rng(seed)
    out = []
    for g in range(n_graphs):
        n = int(rng.integers(2, max_nodes + 1))
        a1 = random_attention(n, rng)
        for alpha in alphas:
            ref = diffusion_operator(a1, alpha, horizon)
            for k in ks:
                err = float(np.abs(ref - diffusion_operator(a1, alpha, k)).mean())
                out.append(BoundCheck(n, alpha, k, err, error_bound(alpha, k)))
    return out


def fixed_point_sweep(n_instances: int = 50, max_nodes: int = 30, beta_range=(0.2, 0.8),
                      tolerance: float = 1e-10, seed: int = 0) -> list[FixedPointCheck]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_instances):
        n = int(rng.integers(2, max_nodes + 1))
        a1 = random_attention(n, rng)
        xp = rng.normal(size=(n, int(rng.integers(1, 9))))
        beta = rng.uniform(*beta_range, size=n)
        out.append(check_fixed_point(a1, xp, beta, tolerance))
    return out


def reduction_sweep(n_instances: int = 50, max_nodes: int = 30, seed: int = 0) -> list[float]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_instances):
        n = int(rng.integers(2, max_nodes + 1))
        a1 = random_attention(n, rng)
        xp = rng.normal(size=(n, int(rng.integers(1, 9))))
        alpha = float(rng.uniform(0.01, 0.99))
        k = int(rng.integers(0, 12))
        out.append(check_uniform_reduction(a1, xp, alpha, k))
    return out
