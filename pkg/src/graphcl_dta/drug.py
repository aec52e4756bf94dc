"""GCN drug encoder: symmetric-normalised propagation followed by global max pooling."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .smiles import NUM_ATOM_FEATURES, MolecularGraph


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None, dtype=np.float64) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out)).astype(dtype)


def normalize_adjacency(adj: np.ndarray) -> np.ndarray:
    """Return D^-1/2 (A + I) D^-1/2 for a symmetric 0/1 adjacency matrix."""
    adj = np.asarray(adj, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {adj.shape}")
    if not np.array_equal(adj, adj.T):
        raise ValueError("adjacency must be symmetric")
    a = adj + np.eye(adj.shape[0])
    d = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d[:, None] * d[None, :]


def normalized_adjacency(graph: MolecularGraph) -> np.ndarray:
    """Cached normalised adjacency for ``graph``."""
    if graph._norm_adj is None:
        graph._norm_adj = normalize_adjacency(graph.adjacency)
    return graph._norm_adj


class GcnStack:
    """L bias-free GCN layers of width ``hidden``."""

    def __init__(self, in_dim: int = NUM_ATOM_FEATURES, hidden: int = 128, layers: int = 3,
                 rng: np.random.Generator | None = None, dtype=np.float64):
        if layers < 1:
            raise ValueError("GCN needs at least one layer")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim, self.hidden = in_dim, hidden
        self.weights = []
        for layer in range(layers):
            fan_in = in_dim if layer == 0 else hidden
            self.weights.append(Tensor(glorot(rng, fan_in, hidden, dtype=dtype), requires_grad=True))

    @property
    def layers(self) -> int:
        return len(self.weights)

    def parameters(self):
        return [(f"gcn.w{i}", w) for i, w in enumerate(self.weights)]


def gcn_forward(graph: MolecularGraph, stack: GcnStack) -> Tensor:
    """Node-level representation Z^F (n x h)."""
    x = graph.atom_features
    if x.shape[1] != stack.in_dim:
        raise ValueError(f"atom features have {x.shape[1]} columns, GCN expects {stack.in_dim}")
    dtype = stack.weights[0].dtype
    a_hat = Tensor(normalized_adjacency(graph).astype(dtype, copy=False))
    z = Tensor(x.astype(dtype, copy=False))
    for w in stack.weights:
        z = ad.relu(ad.matmul(a_hat, ad.matmul(z, w)))
    return z


def global_max_pool(z: Tensor) -> Tensor:
    """Column-wise max over atoms -> (1, h)."""
    if z.shape[0] < 1:
        raise ValueError("cannot pool an empty graph")
    return ad.tmax(z, axis=0, keepdims=True)


def encode_drug(graph: MolecularGraph, stack: GcnStack) -> Tensor:
    return global_max_pool(gcn_forward(graph, stack))
