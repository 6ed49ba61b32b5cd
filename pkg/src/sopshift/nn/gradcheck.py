"""Central-difference gradient checks for every layer and loss, and the full VAE graph.

The error measure is ``||a - n|| / (||a|| + ||n||)`` over the whole
gradient array (analytic ``a`` vs numerical ``n``); it is 0 for a perfect
match and insensitive to individually tiny entries. See :func:`rel_error`
for the zero-gradient case.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import functional as F
from .layers import BatchNorm, Dense, Sequential, fc_block, Activation

H = 1e-5


def numerical_grad(f: Callable[[], float], x: np.ndarray, h: float = H) -> np.ndarray:
    """d f / d x by central differences, perturbing ``x`` in place."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a: np.ndarray, n: np.ndarray, floor: float = 1e-6) -> float:
    """``||a - n|| / max(||a|| + ||n||, floor)``.

    The floor only matters for gradients that are identically zero, such
    as a dense bias feeding batch norm, where the numerical estimate is
    pure rounding noise.
    """
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), floor))


def check_module(module, x: np.ndarray, rng: np.random.Generator) -> float:
    """Relative error of the gradient w.r.t. the input and all parameters, as one vector.

    The scalar probed is ``sum(w * module(x))`` for a fixed random ``w``.
    """
    w = rng.standard_normal(module.forward(x).shape)

    def f():
        return float((w * module.forward(x)).sum())

    module.zero_grad()
    module.forward(x)
    gx = module.backward(w)
    ana, num = [gx.ravel()], [numerical_grad(f, x).ravel()]
    for _, p in module.named_parameters():
        ana.append(p.grad.ravel().copy())
        num.append(numerical_grad(f, p.value).ravel())
    return rel_error(np.concatenate(ana), np.concatenate(num))


def check_loss(loss_fn, logits: np.ndarray) -> float:
    _, g = loss_fn(logits)
    return rel_error(g, numerical_grad(lambda: loss_fn(logits)[0], logits))


def check_vae_graph(seed: int = 0, batch: int = 5, input_dim: int = 6) -> float:
    """Total VAE loss against every parameter of a tiny model, with frozen noise.

    Dropout is off and batch norm runs in training mode, so the loss is a
    deterministic function of the parameters once ``eps`` is fixed.
    """
    from ..models.config import VaeConfig
    from ..models.vae import ClassifierVAE, vae_loss

    rng = np.random.default_rng(seed)
    cfg = VaeConfig(hidden=(64,), latent_dim=8, activation="silu", dropout=0.0, beta=0.7,
                    lambda_rcst=1.3, lambda_clf=0.9)
    model = ClassifierVAE(cfg, seed, input_dim=input_dim)
    x = rng.standard_normal((batch, input_dim))
    y = rng.integers(0, 3, batch)
    eps = rng.standard_normal((batch, cfg.latent_dim))

    def loss():
        out = model.forward(x, eps=eps)
        return vae_loss(x, out.x_rec, out.mu, out.logvar, out.logits, y, cfg.beta, cfg.lambda_rcst, cfg.lambda_clf)

    model.train()
    model.zero_grad()
    L = loss()
    model.backward(L.g_xrec, L.g_logits, L.g_mu, L.g_logvar)
    # compared as one flat gradient vector: the pre-BN biases have an exactly
    # zero gradient, so a per-tensor ratio would only measure round-off
    ana, num = [], []
    for _, p in model.named_parameters():
        ana.append(p.grad.ravel().copy())
        num.append(numerical_grad(lambda: loss().total, p.value).ravel())
    return rel_error(np.concatenate(ana), np.concatenate(num))


def _instances(rng, n):
    for _ in range(n):
        yield int(rng.integers(2, 7)), int(rng.integers(2, 7))


def run_suite(n_instances: int = 20, seed: int = 0) -> dict[str, float]:
    """Worst relative error per component over ``n_instances`` random cases."""
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}

    def record(name, err):
        worst[name] = max(worst.get(name, 0.0), err)

    for b, d in _instances(rng, n_instances):
        d_out = int(rng.integers(2, 7))
        x = rng.standard_normal((b, d))
        record("dense", check_module(Dense(d, d_out, rng), x.copy(), rng))
        # a two-row batch normalizes to +-1 whatever the input, so its input
        # gradient is ~0 and the ratio would measure round-off only
        xb = rng.standard_normal((b + 1, d))
        bn = BatchNorm(d)
        bn.gamma.value[...] = rng.uniform(0.5, 1.5, d)
        bn.beta.value[...] = rng.standard_normal(d)
        record("batchnorm", check_module(bn, xb * 2 + 1, rng))
        block = fc_block(d, d_out, "silu", 0.0, rng)
        record("dense_bn_act", check_module(block, xb.copy(), rng))
        for kind in F.ACTIVATIONS:
            xa = rng.standard_normal((b, d)) * 2
            xa[np.abs(xa) < 1e-3] = 0.5  # keep clear of the relu/leaky kink
            record(kind, check_module(Activation(kind), xa, rng))
        drop = Sequential(Dense(d, d_out, rng), fc_block(d_out, d_out, "relu", 0.3, rng, batch_norm=False))
        drop.eval()
        record("dropout_eval_path", check_module(drop, x.copy(), rng))

        logits = rng.standard_normal((b, 3)) * 2
        t = rng.integers(0, 3, b)
        alpha = float(rng.uniform(0, 0.15))
        gamma = float(rng.uniform(0.5, 5.0))
        record("ce_ls", check_loss(lambda z: F.softmax_ce_ls(z, t, alpha), logits.copy()))
        record("focal", check_loss(lambda z: F.focal_loss(z, t, gamma), logits.copy()))
        target = rng.standard_normal((b, d))
        record("mse", check_loss(lambda z: F.mse(target, z), rng.standard_normal((b, d))))
        mu = rng.standard_normal((b, d))
        lv = rng.standard_normal((b, d))
        record("kl_mu", check_loss(lambda z: F.gaussian_kl(z, lv)[:2], mu.copy()))
        record("kl_logvar", check_loss(lambda z: (F.gaussian_kl(mu, z)[0], F.gaussian_kl(mu, z)[2]), lv.copy()))
    record("vae_graph", check_vae_graph(seed))
    return worst
