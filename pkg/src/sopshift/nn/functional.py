"""Stateless activations and losses. Every loss returns ``(value, grad)``."""

from __future__ import annotations

import math

import numpy as np

LOGVAR_MIN, LOGVAR_MAX = -80.0, 20.0
N_CLASSES = 3

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_K = 0.044715
LEAKY_SLOPE = 0.01
ACTIVATIONS = ("relu", "gelu", "elu", "silu", "leaky_relu")


def _sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def act_forward(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "leaky_relu":
        return np.where(x > 0, x, LEAKY_SLOPE * x)
    if kind == "elu":
        return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))
    if kind == "silu":
        return x * _sigmoid(x)
    if kind == "gelu":
        # tanh approximation
        return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_K * x**3)))
    raise ValueError(f"unknown activation {kind!r}")


def act_backward(kind: str, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the activation input ``x`` given upstream ``grad``."""
    if kind == "relu":
        return grad * (x > 0)
    if kind == "leaky_relu":
        return grad * np.where(x > 0, 1.0, LEAKY_SLOPE)
    if kind == "elu":
        return grad * np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))
    if kind == "silu":
        s = _sigmoid(x)
        return grad * s * (1.0 + x * (1.0 - s))
    if kind == "gelu":
        u = _GELU_C * (x + _GELU_K * x**3)
        t = np.tanh(u)
        du = _GELU_C * (1.0 + 3.0 * _GELU_K * x**2)
        return grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du)
    raise ValueError(f"unknown activation {kind!r}")


def relu(x):
    return act_forward("relu", np.asarray(x, dtype=np.float64))


def gelu(x):
    return act_forward("gelu", np.asarray(x, dtype=np.float64))


def elu(x):
    return act_forward("elu", np.asarray(x, dtype=np.float64))


def silu(x):
    return act_forward("silu", np.asarray(x, dtype=np.float64))


def leaky_relu(x):
    return act_forward("leaky_relu", np.asarray(x, dtype=np.float64))


# --- classification losses ------------------------------------------------------

def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def _check_targets(targets, n_rows: int, n_classes: int) -> np.ndarray:
    t = np.asarray(targets)
    if t.shape != (n_rows,):
        raise ValueError(f"expected {n_rows} targets, got shape {t.shape}")
    if not np.issubdtype(t.dtype, np.integer) or t.min(initial=0) < 0 or t.max(initial=0) >= n_classes:
        raise ValueError(f"targets must be integer class codes in [0, {n_classes})")
    return t.astype(np.int64)


def softmax_ce_ls(logits: np.ndarray, targets, alpha: float = 0.0) -> tuple[float, np.ndarray]:
    """Mean cross-entropy against ``(1 - alpha) * onehot + alpha / K``."""
    logits = np.asarray(logits, dtype=np.float64)
    b, k = logits.shape
    t = _check_targets(targets, b, k)
    if not 0.0 <= alpha <= 0.15:
        raise ValueError(f"label smoothing alpha must lie in [0, 0.15], got {alpha}")
    logp = log_softmax(logits)
    q = np.full((b, k), alpha / k)
    q[np.arange(b), t] += 1.0 - alpha
    loss = -(q * logp).sum() / b
    grad = (np.exp(logp) - q) / b
    return float(loss), grad


def cross_entropy(logits, targets) -> tuple[float, np.ndarray]:
    return softmax_ce_ls(logits, targets, 0.0)


def focal_loss(logits: np.ndarray, targets, gamma: float) -> tuple[float, np.ndarray]:
    """Mean of ``-(1 - p_t)**gamma * log p_t``."""
    logits = np.asarray(logits, dtype=np.float64)
    b, k = logits.shape
    t = _check_targets(targets, b, k)
    if gamma != 0 and not 0.5 <= gamma <= 5.0:
        raise ValueError(f"focal gamma must be 0 or lie in [0.5, 5], got {gamma}")
    logp = log_softmax(logits)
    p = np.exp(logp)
    rows = np.arange(b)
    logpt = logp[rows, t]
    pt = p[rows, t]
    others = p.copy()
    others[rows, t] = 0.0
    u = others.sum(axis=1)  # 1 - p_t without cancellation
    w = u**gamma
    loss = -(w * logpt).sum() / b
    # dL/dz_j = g * (delta_jt - p_j) with g = p_t * dL/dp_t
    ratio = np.where(u > 1e-12, logpt / np.where(u > 1e-12, u, 1.0), -1.0)
    g = gamma * pt * w * ratio - w
    onehot = np.zeros_like(p)
    onehot[rows, t] = 1.0
    grad = g[:, None] * (onehot - p) / b
    return float(loss), grad


# --- VAE terms -----------------------------------------------------------------

def mse(x: np.ndarray, x_rec: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch mean of the per-row squared error; gradient is w.r.t. ``x_rec``."""
    x = np.asarray(x, dtype=np.float64)
    x_rec = np.asarray(x_rec, dtype=np.float64)
    if x.shape != x_rec.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_rec.shape}")
    b = x.shape[0]
    diff = x_rec - x
    return float((diff**2).sum() / b), 2.0 * diff / b


def _clamp_logvar(logvar):
    lv = np.clip(logvar, LOGVAR_MIN, LOGVAR_MAX)
    inside = (logvar >= LOGVAR_MIN) & (logvar <= LOGVAR_MAX)
    return lv, inside


def gaussian_kl(mu: np.ndarray, logvar: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over latent dims, averaged over the batch.

    Returns ``(value, d/dmu, d/dlogvar)``.
    """
    mu = np.asarray(mu, dtype=np.float64)
    lv, inside = _clamp_logvar(np.asarray(logvar, dtype=np.float64))
    b = mu.shape[0]
    var = np.exp(lv)
    value = 0.5 * (mu**2 + var - 1.0 - lv).sum() / b
    return float(value), mu / b, 0.5 * (var - 1.0) / b * inside


def reparameterize(mu: np.ndarray, logvar: np.ndarray, rng=None, eps: np.ndarray | None = None):
    """``z = mu + eps * exp(logvar / 2)``; returns ``(z, eps)``.

    Pass ``eps`` to freeze the noise, otherwise it is drawn from ``rng``
    (a Generator or an integer seed).
    """
    mu = np.asarray(mu, dtype=np.float64)
    lv, _ = _clamp_logvar(np.asarray(logvar, dtype=np.float64))
    if eps is None:
        rng = np.random.default_rng(rng)
        eps = rng.standard_normal(mu.shape)
    return mu + eps * np.exp(0.5 * lv), eps


def reparameterize_backward(logvar: np.ndarray, eps: np.ndarray, grad_z: np.ndarray):
    """Gradients of ``z`` w.r.t. ``(mu, logvar)`` given upstream ``grad_z``."""
    lv, inside = _clamp_logvar(logvar)
    return grad_z, grad_z * 0.5 * eps * np.exp(0.5 * lv) * inside
