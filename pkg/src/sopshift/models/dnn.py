"""Residual fully-connected classifier."""

from __future__ import annotations

import numpy as np

from ..nn.layers import Dense, Module, ResidualBlock
from .config import INPUT_DIM, N_CLASSES, DnnConfig


class ResidualMLP(Module):
    kind = "dnn"

    def __init__(self, cfg: DnnConfig, seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        rng = np.random.default_rng(seed)
        dims = (INPUT_DIM,) + tuple(cfg.widths)
        self.blocks = [
            ResidualBlock(dims[i], dims[i + 1], cfg.activation, cfg.dropout, rng, project=cfg.skip_projection)
            for i in range(len(cfg.widths))
        ]
        self.head = Dense(dims[-1], N_CLASSES, rng)

    def forward(self, x):
        h = x
        for block in self.blocks:
            h = block.forward(h)
        return self.head.forward(h)

    def backward(self, grad):
        g = self.head.backward(grad)
        for block in reversed(self.blocks):
            g = block.backward(g)
        return g

    def logits(self, x, batch: int = 2048):
        """Eval-mode logits, computed in fixed-size chunks."""
        self.eval()
        return np.concatenate([self.forward(x[i : i + batch]) for i in range(0, len(x), batch)]) \
            if len(x) else np.zeros((0, N_CLASSES))

    def widths(self) -> list[int]:
        return [INPUT_DIM] + list(self.cfg.widths) + [N_CLASSES]


def build_dnn(cfg: DnnConfig, seed: int = 0) -> ResidualMLP:
    if not isinstance(cfg, DnnConfig):
        raise TypeError("build_dnn expects a DnnConfig")
    return ResidualMLP(cfg, seed)
