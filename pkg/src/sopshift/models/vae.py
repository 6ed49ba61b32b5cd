"""Variational autoencoder with a classification head on the latent code."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import functional as F
from ..nn.layers import Activation, Dense, Module, Sequential, fc_block
from .config import INPUT_DIM, N_CLASSES, VaeConfig


def make_head(latent_dim: int, activation: str, rng: np.random.Generator) -> Sequential:
    hidden = 2 * latent_dim
    return Sequential(Dense(latent_dim, hidden, rng), Activation(activation), Dense(hidden, N_CLASSES, rng))


class ClassifierVAE(Module):
    kind = "vae"

    def __init__(self, cfg: VaeConfig, seed: int = 0, input_dim: int = INPUT_DIM):
        self.cfg = cfg
        self.seed = seed
        self.input_dim = input_dim
        rng = np.random.default_rng(seed)
        act, p, bn = cfg.activation, cfg.dropout, cfg.batch_norm
        enc_dims = (input_dim,) + tuple(cfg.hidden)
        self.encoder = Sequential(*[fc_block(a, b, act, p, rng, bn) for a, b in zip(enc_dims, enc_dims[1:])])
        self.to_mu = Dense(enc_dims[-1], cfg.latent_dim, rng)
        self.to_logvar = Dense(enc_dims[-1], cfg.latent_dim, rng)
        dec_dims = (cfg.latent_dim,) + tuple(reversed(cfg.hidden))
        self.decoder = Sequential(
            *[fc_block(a, b, act, p, rng, bn) for a, b in zip(dec_dims, dec_dims[1:])],
            Dense(dec_dims[-1], input_dim, rng),
        )
        self.head = make_head(cfg.latent_dim, act, rng)
        self._cache = None

    def encoder_modules(self) -> list[Module]:
        return [self.encoder, self.to_mu, self.to_logvar]

    def encoder_state(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.state().items() if k.split(".")[0] in ("encoder", "to_mu", "to_logvar")}

    def encode(self, x):
        h = self.encoder.forward(x)
        return self.to_mu.forward(h), self.to_logvar.forward(h)

    def forward(self, x, eps=None, rng=None):
        """Training pass: returns a :class:`VaeOutput` with a sampled ``z``."""
        mu, logvar = self.encode(x)
        z, eps = F.reparameterize(mu, logvar, rng=rng, eps=eps)
        out = VaeOutput(mu, logvar, z, eps, self.decoder.forward(z), self.head.forward(z))
        self._cache = out
        return out

    def backward(self, g_xrec=None, g_logits=None, g_mu=None, g_logvar=None):
        out = self._cache
        gz = np.zeros_like(out.z)
        if g_xrec is not None:
            gz += self.decoder.backward(g_xrec)
        if g_logits is not None:
            gz += self.head.backward(g_logits)
        gmu, glv = F.reparameterize_backward(out.logvar, out.eps, gz)
        if g_mu is not None:
            gmu = gmu + g_mu
        if g_logvar is not None:
            glv = glv + g_logvar
        gh = self.to_mu.backward(gmu) + self.to_logvar.backward(glv)
        return self.encoder.backward(gh)

    def latent_params(self, x, batch: int = 2048):
        """Eval-mode ``(mu, logvar)`` for every row of ``x``."""
        self.eval()
        if not len(x):
            empty = np.zeros((0, self.cfg.latent_dim))
            return empty, empty
        parts = [self.encode(x[i : i + batch]) for i in range(0, len(x), batch)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def latent_mean(self, x, batch: int = 2048):
        return self.latent_params(x, batch)[0]

    def logits(self, x, batch: int = 2048):
        """Eval-mode class scores from the head applied to the latent mean."""
        mu = self.latent_mean(x, batch)
        self.head.eval()
        return self.head.forward(mu) if len(mu) else np.zeros((0, N_CLASSES))

    def widths(self) -> dict[str, list[int]]:
        enc = [self.input_dim] + list(self.cfg.hidden) + [self.cfg.latent_dim]
        return {"encoder": enc, "decoder": enc[::-1],
                "head": [self.cfg.latent_dim, 2 * self.cfg.latent_dim, N_CLASSES]}


@dataclass
class VaeOutput:
    mu: np.ndarray
    logvar: np.ndarray
    z: np.ndarray
    eps: np.ndarray
    x_rec: np.ndarray
    logits: np.ndarray


def build_vae(cfg: VaeConfig, seed: int = 0) -> ClassifierVAE:
    if not isinstance(cfg, VaeConfig):
        raise TypeError("build_vae expects a VaeConfig")
    return ClassifierVAE(cfg, seed)


def beta_warmup(beta: float, warmup_epochs: int, epoch: int) -> float:
    """Cosine ramp of the KL weight from 0 to ``beta`` over ``warmup_epochs``; flat if 0."""
    if warmup_epochs < 0:
        raise ValueError("warmup_epochs must be >= 0")
    if warmup_epochs == 0:
        return beta
    e = min(epoch, warmup_epochs)
    return beta * 0.5 * (1.0 - np.cos(np.pi * e / warmup_epochs))


@dataclass
class VaeLoss:
    total: float
    kl: float
    rcst: float
    clf: float
    g_xrec: np.ndarray
    g_logits: np.ndarray
    g_mu: np.ndarray
    g_logvar: np.ndarray


def vae_loss(x, x_rec, mu, logvar, logits, y, beta_eff: float, lambda_rcst: float, lambda_clf: float) -> VaeLoss:
    """Weighted sum of KL, reconstruction MSE and plain (unsmoothed) cross-entropy."""
    kl, g_mu, g_lv = F.gaussian_kl(mu, logvar)
    rc, g_rec = F.mse(x, x_rec)
    ce, g_log = F.cross_entropy(logits, y)
    total = beta_eff * kl + lambda_rcst * rc + lambda_clf * ce
    return VaeLoss(total, kl, rc, ce, lambda_rcst * g_rec, lambda_clf * g_log, beta_eff * g_mu, beta_eff * g_lv)
