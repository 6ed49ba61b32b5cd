"""SGD-Nesterov, Adam, AdamW and RMSprop over lists of :class:`Parameter`.

Weight decay is an L2 term added to the gradient for every optimizer
except AdamW, which shrinks the weights directly (decoupled decay).
"""

from __future__ import annotations

import numpy as np

from .layers import Parameter

OPTIMIZERS = ("adamw", "adam", "sgd_nesterov", "rmsprop")


class Optimizer:
    def __init__(self, params: list[Parameter], lr: float, weight_decay: float = 0.0):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.lr_scale = 1.0
        self.t = 0

    @property
    def current_lr(self) -> float:
        return self.lr * self.lr_scale

    def step(self) -> None:
        self.t += 1
        lr = self.current_lr
        for i, p in enumerate(self.params):
            self._update(i, p, lr)

    def _update(self, i: int, p: Parameter, lr: float) -> None:
        raise NotImplementedError


class SgdNesterov(Optimizer):
    def __init__(self, params, lr, weight_decay=0.0, momentum=0.9):
        super().__init__(params, lr, weight_decay)
        self.momentum = momentum
        self.buf = [np.zeros_like(p.value) for p in self.params]

    def _update(self, i, p, lr):
        g = p.grad + self.weight_decay * p.value
        self.buf[i] = self.momentum * self.buf[i] + g
        p.value -= lr * (g + self.momentum * self.buf[i])


class Adam(Optimizer):
    def __init__(self, params, lr, weight_decay=0.0, betas=(0.9, 0.999), eps=1e-8):
        super().__init__(params, lr, weight_decay)
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def _grad(self, p):
        return p.grad + self.weight_decay * p.value

    def _update(self, i, p, lr):
        g = self._grad(p)
        self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
        self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
        m_hat = self.m[i] / (1 - self.b1**self.t)
        v_hat = self.v[i] / (1 - self.b2**self.t)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


class AdamW(Adam):
    def _grad(self, p):
        return p.grad

    def _update(self, i, p, lr):
        p.value *= 1.0 - lr * self.weight_decay
        super()._update(i, p, lr)


class RmsProp(Optimizer):
    def __init__(self, params, lr, weight_decay=0.0, momentum=0.0, alpha=0.99, eps=1e-8):
        super().__init__(params, lr, weight_decay)
        self.momentum = momentum
        self.alpha = alpha
        self.eps = eps
        self.sq = [np.zeros_like(p.value) for p in self.params]
        self.buf = [np.zeros_like(p.value) for p in self.params]

    def _update(self, i, p, lr):
        g = p.grad + self.weight_decay * p.value
        self.sq[i] = self.alpha * self.sq[i] + (1 - self.alpha) * g * g
        step = g / (np.sqrt(self.sq[i]) + self.eps)
        if self.momentum:
            self.buf[i] = self.momentum * self.buf[i] + step
            step = self.buf[i]
        p.value -= lr * step


def make_optimizer(kind: str, params, lr: float, weight_decay: float = 0.0, momentum: float | None = None) -> Optimizer:
    if kind == "adamw":
        return AdamW(params, lr, weight_decay)
    if kind == "adam":
        return Adam(params, lr, weight_decay)
    if kind == "sgd_nesterov":
        return SgdNesterov(params, lr, weight_decay, 0.9 if momentum is None else momentum)
    if kind == "rmsprop":
        return RmsProp(params, lr, weight_decay, 0.0 if momentum is None else momentum)
    raise ValueError(f"unknown optimizer {kind!r}; expected one of {OPTIMIZERS}")
