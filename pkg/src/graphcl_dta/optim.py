from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class Adam:
    def __init__(self, params: list[Tensor], lr: float = 5e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict[str, np.ndarray]:
        out = {"adam.t": np.array([self.t], dtype=np.int64)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"adam.m{i}"] = m
            out[f"adam.v{i}"] = v
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["adam.t"][0])
        for i in range(len(self.params)):
            self.m[i][...] = state[f"adam.m{i}"]
            self.v[i][...] = state[f"adam.v{i}"]
