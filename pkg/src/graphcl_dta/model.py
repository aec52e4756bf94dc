"""Full model: GCN drug encoder + CNN target encoder + prediction head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import RunConfig
from .drug import GcnStack, encode_drug
from .objective import (LossWeights, PredictionHead, contrastive_loss, contrastive_views, joint_loss,
                        mse_loss, normalize_rows, uniformity_loss)
from .protein import CnnEncoder, TokenizedProtein
from .smiles import MolecularGraph

PARAM_GROUPS = ("gcn", "embedding", "conv", "head")


def param_group(name: str) -> str:
    if name.startswith("gcn."):
        return "gcn"
    if name == "cnn.embedding":
        return "embedding"
    if name.startswith("cnn."):
        return "conv"
    return "head"


class GraphCLDTA:
    def __init__(self, cfg: RunConfig, seed: int | None = None):
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        dtype = cfg.dtype
        self.gcn = GcnStack(hidden=cfg.drug_dim, layers=cfg.gcn_layers, rng=rng, dtype=dtype)
        self.cnn = CnnEncoder(out_dim=cfg.target_dim, embed_dim=cfg.embed_dim, channels=tuple(cfg.conv_channels),
                              kernel=cfg.kernel_size, rng=rng, dtype=dtype)
        self.head = PredictionHead(cfg.drug_dim, cfg.target_dim, rng=rng, dtype=dtype)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return self.gcn.parameters() + self.cnn.parameters() + self.head.parameters()

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.named_parameters():
            if name not in state:
                raise KeyError(f"missing parameter {name}")
            if state[name].shape != p.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {p.shape}")
            p.data[...] = state[name]

    def encode_drugs(self, graphs: list[MolecularGraph]) -> Tensor:
        return ad.concat([encode_drug(g, self.gcn) for g in graphs], axis=0)

    def encode_targets(self, proteins: list[TokenizedProtein]) -> Tensor:
        return self.cnn(np.stack([t.tokens for t in proteins]))


@dataclass
class BatchLosses:
    mse: Tensor
    gcl: Tensor
    uniform_d: Tensor
    uniform_t: Tensor
    joint: Tensor
    predictions: np.ndarray

    def values(self) -> dict[str, float]:
        return {
            "L_mse": self.mse.item(),
            "L_gcl": self.gcl.item(),
            "L_uniform_d": self.uniform_d.item(),
            "L_uniform_t": self.uniform_t.item(),
            "L_joint": self.joint.item(),
        }


def _unique(ids: list[str]) -> tuple[list[str], np.ndarray]:
    order: dict[str, int] = {}
    pos = np.array([order.setdefault(i, len(order)) for i in ids], dtype=np.int64)
    return list(order), pos


def forward(model: GraphCLDTA, graphs: dict[str, MolecularGraph], proteins: dict[str, TokenizedProtein],
            drug_ids: list[str], target_ids: list[str]) -> tuple[Tensor, Tensor, Tensor]:
    """Predictions for a batch plus the de-duplicated drug/target representations."""
    u_drugs, d_pos = _unique(drug_ids)
    u_targets, t_pos = _unique(target_ids)
    d = model.encode_drugs([graphs[k] for k in u_drugs])
    t = model.encode_targets([proteins[k] for k in u_targets])
    dt = ad.concat([ad.take_rows(d, d_pos), ad.take_rows(t, t_pos)], axis=1)
    return model.head(dt), d, t


def batch_losses(model: GraphCLDTA, graphs, proteins, drug_ids, target_ids, labels,
                 weights: LossWeights, rng: np.random.Generator, cosine: bool = False,
                 sphere: bool = True) -> BatchLosses:
    pred, d, t = forward(model, graphs, proteins, drug_ids, target_ids)
    mse = mse_loss(pred, labels)
    e1, e2 = contrastive_views(d, weights.epsilon, rng)
    gcl = contrastive_loss(e1, e2, weights.tau, cosine=cosine)
    uni_d = uniformity_loss(normalize_rows(d) if sphere else d)
    uni_t = uniformity_loss(normalize_rows(t) if sphere else t)
    joint = joint_loss(mse, gcl, uni_d, uni_t, weights)
    return BatchLosses(mse, gcl, uni_d, uni_t, joint, pred.data.copy())


def predict(model: GraphCLDTA, graphs, proteins, drug_ids, target_ids, batch_size: int = 512) -> np.ndarray:
    """Deterministic forward passes, no noise."""
    out = []
    with ad.no_grad():
        for s in range(0, len(drug_ids), batch_size):
            pred, _, _ = forward(model, graphs, proteins, drug_ids[s:s + batch_size], target_ids[s:s + batch_size])
            out.append(pred.data.astype(np.float64))
    return np.concatenate(out) if out else np.zeros(0)
