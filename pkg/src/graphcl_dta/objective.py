"""Prediction head and every loss term of the joint objective."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .drug import glorot

logger = logging.getLogger(__name__)


class NumericError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.5
    beta: float = 0.5
    tau: float = 0.2
    epsilon: float = 0.1

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")


class PredictionHead:
    """Three affine layers, ReLU between them, scalar output with no activation."""

    def __init__(self, drug_dim: int = 128, target_dim: int = 128, hidden: int | None = None,
                 rng: np.random.Generator | None = None, dtype=np.float64):
        rng = rng if rng is not None else np.random.default_rng(0)
        hidden = hidden or drug_dim
        self.in_dim = drug_dim + target_dim
        dims = [(self.in_dim, hidden), (hidden, hidden), (hidden, 1)]
        self.layers = [
            (Tensor(glorot(rng, i, o, dtype=dtype), requires_grad=True), Tensor(np.zeros(o, dtype=dtype), requires_grad=True))
            for i, o in dims
        ]

    def parameters(self):
        out = []
        for i, (w, b) in enumerate(self.layers):
            out += [(f"head.v{i + 1}", w), (f"head.b{i + 1}", b)]
        return out

    def __call__(self, dt: Tensor) -> Tensor:
        """``dt`` is (c, 2h); returns predictions of shape (c,)."""
        if dt.ndim != 2 or dt.shape[1] != self.in_dim:
            raise ad.ShapeError(f"prediction head expects width {self.in_dim}, got shape {dt.shape}")
        x = dt
        for i, (w, b) in enumerate(self.layers):
            x = ad.add(ad.matmul(x, w), b)
            if i < len(self.layers) - 1:
                x = ad.relu(x)
        return ad.reshape(x, (-1,))


def predict_affinity(d: Tensor, t: Tensor, head: PredictionHead) -> Tensor:
    """Affinity for one (drug, target) pair from (1, h) representations."""
    return head(ad.concat([d, t], axis=1))


def mse_loss(pred: Tensor, labels) -> Tensor:
    labels = np.asarray(labels, dtype=pred.dtype)
    if pred.shape != labels.shape or pred.data.size == 0:
        raise ad.ShapeError(f"mse_loss: prediction shape {pred.shape} vs label shape {labels.shape}")
    diff = ad.sub(pred, labels)
    return ad.mean(ad.mul(diff, diff))


def sample_noise(d: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Noise with L2 norm ``epsilon`` lying in the same hyperoctant as ``d``."""
    d = np.asarray(d)
    raw = rng.uniform(0.0, 1.0, size=d.shape) * np.sign(d)
    norm = np.sqrt(np.sum(raw * raw))
    if norm == 0.0:
        # all-zero embedding: no hyperoctant to respect
        raw = rng.standard_normal(d.shape)
        norm = np.sqrt(np.sum(raw * raw))
    return raw * (epsilon / norm)


def sample_noise_pair(d, epsilon: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    d = d.data if isinstance(d, Tensor) else np.asarray(d, dtype=np.float64)
    return sample_noise(d, epsilon, rng), sample_noise(d, epsilon, rng)


def contrastive_views(d: Tensor, epsilon: float, rng: np.random.Generator) -> tuple[Tensor, Tensor]:
    """Two perturbed copies of each row of ``d`` (m x h); noise is treated as a constant."""
    first = np.empty_like(d.data)
    second = np.empty_like(d.data)
    for i in range(d.shape[0]):
        first[i], second[i] = sample_noise_pair(d.data[i], epsilon, rng)
    return ad.add(d, first), ad.add(d, second)


def normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Project each row onto the unit hypersphere."""
    return ad.div(x, ad.reshape(ad.add(ad.row_norm(x), eps), (-1, 1)))


def contrastive_loss(e1: Tensor, e2: Tensor, tau: float, cosine: bool = False) -> Tensor:
    """Sum over the batch of -log softmax of the matching view, raw dot-product similarity."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if e1.shape != e2.shape or e1.ndim != 2:
        raise ad.ShapeError(f"contrastive_loss: view shapes {e1.shape} and {e2.shape}")
    if cosine:
        e1, e2 = normalize_rows(e1), normalize_rows(e2)
    logits = ad.mul(ad.matmul(e1, ad.transpose(e2)), 1.0 / tau)
    positive = ad.mul(ad.tsum(ad.mul(e1, e2), axis=1), 1.0 / tau)
    return ad.tsum(ad.sub(ad.logsumexp(logits, axis=1), positive))


def unique_rows(ids) -> list[int]:
    """Positions of the first occurrence of each id, in order."""
    seen, keep = set(), []
    for pos, key in enumerate(ids):
        if key not in seen:
            seen.add(key)
            keep.append(pos)
    return keep


def uniformity_loss(x: Tensor, ids=None) -> Tensor:
    """log of the mean over distinct pairs of exp(-2 * ||x_u - x_v||)."""
    if ids is not None:
        keep = unique_rows(ids)
        if len(keep) != x.shape[0]:
            x = ad.take_rows(x, keep)
    m = x.shape[0]
    if m < 2:
        logger.warning("uniformity term needs at least 2 distinct embeddings, got %d; contributing 0", m)
        return Tensor(np.zeros((), dtype=x.dtype))
    iu, iv = np.triu_indices(m, k=1)
    dist = ad.row_norm(ad.sub(ad.take_rows(x, iu), ad.take_rows(x, iv)))
    return ad.sub(ad.logsumexp(ad.mul(dist, -2.0), axis=0), math.log(len(iu)))


def joint_loss(mse: Tensor, cl: Tensor, uni_d: Tensor, uni_t: Tensor, w: LossWeights) -> Tensor:
    for name, term in (("L_mse", mse), ("L_gcl", cl), ("L_uniform_d", uni_d), ("L_uniform_t", uni_t)):
        if not np.all(np.isfinite(term.data)):
            raise NumericError(f"non-finite loss term {name}")
    total = ad.add(mse, ad.mul(cl, w.alpha))
    return ad.add(total, ad.mul(ad.add(uni_d, uni_t), w.beta))
