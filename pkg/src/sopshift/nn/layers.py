"""Dense-network building blocks with explicit forward/backward passes.

Each module caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``Parameter.grad`` during
``backward``. Call :meth:`Module.zero_grad` between steps.
"""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import functional as F


class Parameter:
    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size


class Module:
    training = True

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for name, v in vars(self).items():
            if isinstance(v, Module):
                yield name, v
            elif isinstance(v, (list, tuple)):
                for i, m in enumerate(v):
                    if isinstance(m, Module):
                        yield f"{name}.{i}", m

    def own_parameters(self) -> Iterator[tuple[str, Parameter]]:
        for name, v in vars(self).items():
            if isinstance(v, Parameter):
                yield name, v

    def own_buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(())

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, p in self.own_parameters():
            yield prefix + name, p
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, b in self.own_buffers():
            yield prefix + name, b
        for name, child in self.children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad[...] = 0.0

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state(self) -> dict[str, np.ndarray]:
        """Copies of all parameters and buffers, keyed by dotted name."""
        out = {name: p.value.copy() for name, p in self.named_parameters()}
        out.update({name: b.copy() for name, b in self.named_buffers()})
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        targets = {name: p.value for name, p in self.named_parameters()}
        targets.update(dict(self.named_buffers()))
        missing = set(targets) - set(state)
        if missing:
            raise KeyError(f"state is missing {sorted(missing)}")
        for name, arr in targets.items():
            src = np.asarray(state[name])
            if src.shape != arr.shape:
                raise ValueError(f"{name}: shape {src.shape} does not match {arr.shape}")
            arr[...] = src

    def __call__(self, x):
        return self.forward(x)


def glorot_uniform(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    bound = math.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-bound, bound, size=(d_out, d_in))


class Dense(Module):
    """``y = x W^T + b`` with ``W`` of shape (d_out, d_in)."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator | None = None, bias: bool = True):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d_in, self.d_out = d_in, d_out
        self.W = Parameter(glorot_uniform(d_in, d_out, rng))
        self.b = Parameter(np.zeros(d_out)) if bias else None
        self._x = None

    def forward(self, x):
        if x.shape[1] != self.d_in:
            raise ValueError(f"Dense expects {self.d_in} inputs, got {x.shape[1]}")
        self._x = x
        y = x @ self.W.value.T
        if self.b is not None:
            y = y + self.b.value
        return y

    def backward(self, grad):
        self.W.grad += grad.T @ self._x
        if self.b is not None:
            self.b.grad += grad.sum(axis=0)
        return grad @ self.W.value


def dense_forward(x, W, b):
    x, W, b = (np.asarray(a, dtype=np.float64) for a in (x, W, b))
    if x.ndim != 2 or W.ndim != 2 or x.shape[1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ValueError(f"incompatible shapes x{x.shape} W{W.shape} b{b.shape}")
    return x @ W.T + b


def dense_backward(x, W, grad):
    """Returns ``(dL/dx, dL/dW, dL/db)`` for upstream ``grad = dL/dy``."""
    return grad @ W, grad.T @ x, grad.sum(axis=0)


class BatchNorm(Module):
    def __init__(self, d: int, momentum: float = 0.1, eps: float = 1e-5):
        self.d = d
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(d))
        self.beta = Parameter(np.zeros(d))
        self.running_mean = np.zeros(d)
        self.running_var = np.ones(d)
        self._cache = None

    def own_buffers(self):
        yield "running_mean", self.running_mean
        yield "running_var", self.running_var

    def forward(self, x):
        if self.training:
            n = x.shape[0]
            if n < 2:
                raise ValueError("BatchNorm in train mode needs a batch of at least 2 rows")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            # running variance tracks the unbiased estimate
            self.running_mean[...] = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var[...] = (1 - self.momentum) * self.running_var + self.momentum * var * n / (n - 1)
        else:
            mean, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        self._cache = (xhat, inv, self.training)
        return self.gamma.value * xhat + self.beta.value

    def backward(self, grad):
        xhat, inv, was_training = self._cache
        self.gamma.grad += (grad * xhat).sum(axis=0)
        self.beta.grad += grad.sum(axis=0)
        g = grad * self.gamma.value
        if not was_training:
            return g * inv
        n = grad.shape[0]
        return inv / n * (n * g - g.sum(axis=0) - xhat * (g * xhat).sum(axis=0))


class Dropout(Module):
    """Inverted dropout; the mask stream comes from a seeded generator owned by the layer."""

    def __init__(self, p: float, seed: int | np.random.Generator = 0):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout p must lie in [0, 1), got {p}")
        self.p = p
        self.rng = np.random.default_rng(seed)
        self._mask = None

    def forward(self, x):
        if not self.training or self.p == 0.0:
            self._mask = None
            return x
        self._mask = (self.rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask


def dropout(x, p: float, training: bool, seed=0):
    layer = Dropout(p, seed)
    layer.train(training)
    return layer.forward(np.asarray(x, dtype=np.float64))


class Activation(Module):
    def __init__(self, kind: str):
        if kind not in F.ACTIVATIONS:
            raise ValueError(f"unknown activation {kind!r}")
        self.kind = kind
        self._x = None

    def forward(self, x):
        self._x = x
        return F.act_forward(self.kind, x)

    def backward(self, grad):
        return F.act_backward(self.kind, self._x, grad)


class Sequential(Module):
    def __init__(self, *layers: Module):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, i):
        return self.layers[i]


def fc_block(d_in: int, d_out: int, activation: str, dropout_p: float, rng: np.random.Generator,
             batch_norm: bool = True) -> Sequential:
    """Dense -> (BatchNorm) -> activation -> Dropout."""
    layers: list[Module] = [Dense(d_in, d_out, rng)]
    if batch_norm:
        layers.append(BatchNorm(d_out))
    layers.append(Activation(activation))
    layers.append(Dropout(dropout_p, int(rng.integers(2**63))))
    return Sequential(*layers)


class ResidualBlock(Module):
    """``body(h) + skip(h)``.

    The skip is the identity when widths match. Otherwise it is a learned
    bias-free projection if ``project`` is set, and absent if not.
    """

    def __init__(self, d_in: int, d_out: int, activation: str, dropout_p: float,
                 rng: np.random.Generator, project: bool = False):
        self.d_in, self.d_out = d_in, d_out
        self.body = fc_block(d_in, d_out, activation, dropout_p, rng)
        self.proj = Dense(d_in, d_out, rng, bias=False) if (d_in != d_out and project) else None

    @property
    def skip_kind(self) -> str:
        if self.d_in == self.d_out:
            return "identity"
        return "projection" if self.proj is not None else "none"

    def forward(self, h):
        out = self.body.forward(h)
        if self.d_in == self.d_out:
            out = out + h
        elif self.proj is not None:
            out = out + self.proj.forward(h)
        return out

    def backward(self, grad):
        g = self.body.backward(grad)
        if self.d_in == self.d_out:
            g = g + grad
        elif self.proj is not None:
            g = g + self.proj.backward(grad)
        return g
