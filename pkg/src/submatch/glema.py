"""Graph attention layer with learnable multi-hop attention diffusion.

One layer projects node features, computes bilinear 1-hop attention restricted
to the adjacency mask, learns a per-node teleport probability and then runs K
steps of the teleport recurrence::

    Z0 = X'
    Zk = (1 - beta) * (A1 @ Z_{k-1}) + beta * Z0      (row-wise scaling)

The diffusion operator itself is never formed; ``Z_K`` is used directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

HOP_SCHEDULES = ("interleaved", "increasing", "one-hop")


def hop_schedule(kind: str, num_layers: int) -> list[int]:
    """Diffusion steps per layer: interleaved ``2l-1``, increasing ``l``, or all 1."""
    if kind == "interleaved":
        return [2 * l - 1 for l in range(1, num_layers + 1)]
    if kind == "increasing":
        return list(range(1, num_layers + 1))
    if kind == "one-hop":
        return [1] * num_layers
    raise ValueError(f"unknown hop schedule {kind!r}; expected one of {HOP_SCHEDULES}")


def uniform_init(rng: np.random.Generator, shape, fan_in: int, name: str) -> Tensor:
    """Uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


@dataclass
class HeadParams:
    W_h: Tensor  # (F', F)
    W_e: Tensor  # (F', F')
    W_beta: Tensor  # (2F', 1)
    b_beta: Tensor  # (1, 1)


@dataclass
class GlemaLayerParams:
    heads: list[HeadParams]
    W_o: Tensor  # (H*F', F')
    leaky_slope: float = 0.2

    @property
    def in_dim(self) -> int:
        return self.heads[0].W_h.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W_o.shape[1]

    @classmethod
    def init(cls, in_dim: int, out_dim: int, heads: int, rng: np.random.Generator,
             prefix: str = "", leaky_slope: float = 0.2) -> "GlemaLayerParams":
        hs = []
        for h in range(heads):
            p = f"{prefix}head{h}."
            hs.append(HeadParams(
                W_h=uniform_init(rng, (out_dim, in_dim), in_dim, p + "W_h"),
                W_e=uniform_init(rng, (out_dim, out_dim), out_dim, p + "W_e"),
                W_beta=uniform_init(rng, (2 * out_dim, 1), 2 * out_dim, p + "W_beta"),
                b_beta=Tensor(np.zeros((1, 1)), requires_grad=True, name=p + "b_beta"),
            ))
        W_o = uniform_init(rng, (heads * out_dim, out_dim), heads * out_dim, prefix + "W_o")
        return cls(hs, W_o, leaky_slope)

    def named_parameters(self) -> dict[str, Tensor]:
        out = {}
        for h in self.heads:
            for t in (h.W_h, h.W_e, h.W_beta, h.b_beta):
                out[t.name] = t
        out[self.W_o.name] = self.W_o
        return out


def one_hop_attention(xp: Tensor, mask: np.ndarray, W_e: Tensor, directed: bool,
                      slope: float = 0.2) -> Tensor:
    """Masked row-softmax of leaky-rectified bilinear scores.

    Undirected graphs score a pair with ``x_i W x_j + x_j W x_i``; directed
    graphs use the one-sided ``x_i W x_j`` (row ``i`` receives from ``j``).
    """
    if W_e.shape != (xp.shape[1], xp.shape[1]):
        raise ad.ShapeMismatch(f"W_e {W_e.shape} vs features {xp.shape}")
    if mask.shape != (xp.shape[0], xp.shape[0]):
        raise ad.ShapeMismatch(f"mask {mask.shape} vs {xp.shape[0]} nodes")
    scores = ad.matmul(ad.matmul(xp, W_e), ad.transpose(xp))
    if not directed:
        scores = ad.add(scores, ad.transpose(scores))
    return ad.masked_softmax_rows(ad.leaky_relu(scores, slope), mask)


def learn_teleport(xp: Tensor, a1: Tensor, W_beta: Tensor, b_beta: Tensor) -> Tensor:
    """Per-node teleport probabilities, column of shape (N, 1) in (0, 1)."""
    if W_beta.shape != (2 * xp.shape[1], 1):
        raise ad.ShapeMismatch(f"W_beta {W_beta.shape} vs features {xp.shape}")
    h = ad.concat_cols(xp, ad.matmul(a1, xp))
    return ad.sigmoid(ad.add(ad.matmul(h, W_beta), b_beta))


def diffuse(a1: Tensor, xp: Tensor, beta: Tensor, k: int) -> Tensor:
    """Run ``k`` steps of the per-node teleport recurrence starting at ``xp``."""
    if k < 0:
        raise ValueError("hop count must be >= 0")
    stay = ad.sub(1.0, beta)
    restart = ad.rowwise_scale(beta, xp)
    z = xp
    for _ in range(k):
        z = ad.add(ad.rowwise_scale(stay, ad.matmul(a1, z)), restart)
    return z


def glema_forward(x: Tensor, mask: np.ndarray, params: GlemaLayerParams, k: int,
                  directed: bool = False) -> tuple[Tensor, list[Tensor]]:
    """Apply one layer; returns the new features and each head's 1-hop attention."""
    if x.shape[1] != params.in_dim:
        raise ad.ShapeMismatch(f"input width {x.shape[1]} != layer width {params.in_dim}")
    outs, attentions = [], []
    for head in params.heads:
        xp = ad.matmul(x, ad.transpose(head.W_h))
        a1 = one_hop_attention(xp, mask, head.W_e, directed, params.leaky_slope)
        beta = learn_teleport(xp, a1, head.W_beta, head.b_beta)
        z = diffuse(a1, xp, beta, k)
        outs.append(ad.leaky_relu(z, params.leaky_slope))
        attentions.append(a1)
    merged = outs[0]
    for o in outs[1:]:
        merged = ad.concat_cols(merged, o)
    return ad.matmul(merged, params.W_o), attentions


def uniform_diffusion(a1: np.ndarray, xp: np.ndarray, alpha: float, k: int) -> np.ndarray:
    """Scalar-teleport recurrence on plain arrays (reference for the per-node form)."""
    z = xp
    for _ in range(k):
        z = (1 - alpha) * (a1 @ z) + alpha * xp
    return z


def decay_weights(beta, hops: int) -> np.ndarray:
    """Geometric hop weights ``beta * (1 - beta)**k`` for k in 0..hops-1, one row per node."""
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64)).reshape(-1, 1)
    return beta * (1 - beta) ** np.arange(hops)
