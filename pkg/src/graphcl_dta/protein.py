"""Integer encoding of protein sequences and the 1D-CNN target encoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .drug import glorot

# 25 letters in alphabetical order (no J); A=1, B=2, C=3, ...
AMINO_ACIDS = "ABCDEFGHIKLMNOPQRSTUVWXYZ"
PAD = 0
UNKNOWN = len(AMINO_ACIDS) + 1  # 26
VOCAB_SIZE = UNKNOWN + 1  # rows in the embedding table
_CODE = {ch: i + 1 for i, ch in enumerate(AMINO_ACIDS)}
MAX_LENGTH = 1000


@dataclass(frozen=True)
class TokenizedProtein:
    tokens: np.ndarray  # (M,) int64
    length: int  # original sequence length


def tokenize_protein(sequence: str, max_length: int = MAX_LENGTH) -> TokenizedProtein:
    if not sequence:
        raise ValueError("empty protein sequence")
    codes = [_CODE.get(ch, UNKNOWN) for ch in sequence[:max_length].upper()]
    tokens = np.zeros(max_length, dtype=np.int64)
    tokens[:len(codes)] = codes
    return TokenizedProtein(tokens=tokens, length=len(sequence))


class CnnEncoder:
    """Embedding -> 3 x (conv1d + ReLU) -> max over positions -> affine to ``out_dim``."""

    def __init__(self, out_dim: int = 128, embed_dim: int = 128, channels=(32, 64, 96), kernel: int = 8,
                 rng: np.random.Generator | None = None, dtype=np.float64):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.kernel = kernel
        table = rng.standard_normal((VOCAB_SIZE, embed_dim)).astype(dtype)
        table[PAD] = 0.0
        self.embedding = Tensor(table, requires_grad=True)
        self.convs = []
        c_in = embed_dim
        for c_out in channels:
            w = glorot(rng, kernel * c_in, kernel * c_out, shape=(kernel, c_in, c_out), dtype=dtype)
            self.convs.append((Tensor(w, requires_grad=True), Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)))
            c_in = c_out
        self.proj_w = Tensor(glorot(rng, c_in, out_dim, dtype=dtype), requires_grad=True)
        self.proj_b = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)

    @property
    def shrinkage(self) -> int:
        return len(self.convs) * (self.kernel - 1)

    def check_length(self, max_length: int) -> None:
        if max_length <= self.shrinkage:
            raise ValueError(f"max protein length {max_length} must exceed total kernel shrinkage {self.shrinkage}")

    def parameters(self):
        params = [("cnn.embedding", self.embedding)]
        for i, (w, b) in enumerate(self.convs):
            params += [(f"cnn.conv{i}.w", w), (f"cnn.conv{i}.b", b)]
        params += [("cnn.proj.w", self.proj_w), ("cnn.proj.b", self.proj_b)]
        return params

    def __call__(self, tokens: np.ndarray) -> Tensor:
        """Encode a ``(B, M)`` token matrix into ``(B, out_dim)``."""
        tokens = np.atleast_2d(np.asarray(tokens))
        self.check_length(tokens.shape[1])
        x = ad.embedding(self.embedding, tokens, padding_idx=PAD)
        for w, b in self.convs:
            x = ad.relu(ad.conv1d(x, w, b))
        pooled = ad.tmax(x, axis=1)
        return ad.add(ad.matmul(pooled, self.proj_w), self.proj_b)


def protein_encode(tokens: TokenizedProtein, enc: CnnEncoder) -> Tensor:
    """Single target representation, shape (1, h)."""
    return enc(tokens.tokens[None, :])
