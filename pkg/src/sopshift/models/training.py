"""Mini-batch training loops with early stopping on validation accuracy."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..nn import functional as F
from ..nn.layers import Module
from ..nn.optim import make_optimizer
from ..nn.schedules import make_schedule
from .config import DnnConfig, VaeConfig
from .dnn import ResidualMLP
from .vae import ClassifierVAE, beta_warmup, make_head, vae_loss

EpochHook = Callable[[int, float], None]


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    val_detail: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    stopped_epoch: int = -1
    wall_time: float = 0.0
    diverged: bool = False
    select_from: int = 0  # earlier epochs are logged but never selected

    @property
    def best_val_acc(self) -> float:
        eligible = self.val_acc[self.select_from:]
        return max(eligible) if eligible else 0.0

    @property
    def objective(self) -> float:
        return 0.0 if self.diverged else self.best_val_acc

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss, "train_acc": self.train_acc, "val_loss": self.val_loss,
            "val_acc": self.val_acc, "val_detail": self.val_detail, "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch, "wall_time": self.wall_time, "diverged": self.diverged,
            "select_from": self.select_from, "best_val_acc": self.best_val_acc,
        }


def accuracy(logits: np.ndarray, y: np.ndarray) -> float:
    return float((logits.argmax(axis=1) == y).mean()) if len(y) else 0.0


def batches(n: int, size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for i in range(0, n, size):
        idx = order[i : i + size]
        if idx.size >= 2:  # batch norm needs two rows
            yield idx


def fit(
    model: Module,
    step: Callable[[np.ndarray, int], tuple[float, int]],
    validate: Callable[[], tuple[float, float, dict]],
    n_train: int,
    cfg,
    max_epochs: int,
    patience: int,
    seed: int,
    params=None,
    on_epoch: EpochHook | None = None,
    loss_tiebreak: bool = False,
    select_from: int = 0,
) -> TrainReport:
    """Shared loop: shuffle, step, validate, schedule, keep the best state.

    ``step(idx, epoch)`` runs forward/backward on one batch and returns the
    batch loss and number of correct predictions. ``validate()`` returns
    ``(accuracy, loss, detail)`` in eval mode. Stops once the validation
    accuracy has not improved for more than ``patience`` epochs and restores
    the best epoch's parameters. Ties go to the earliest epoch unless
    ``loss_tiebreak`` is set, in which case a lower validation loss at equal
    accuracy also counts as an improvement. Epochs before ``select_from``
    are logged but neither selected nor counted against the patience.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    params = model.parameters() if params is None else params
    opt = make_optimizer(cfg.optimizer, params, cfg.lr, cfg.weight_decay, cfg.momentum)
    sched = make_schedule(cfg.schedule, max_epochs, patience=cfg.plateau_patience,
                          warmup=getattr(cfg, "warmup_epochs", 0))
    opt.lr_scale = sched.multiplier
    rep = TrainReport(select_from=min(max(select_from, 0), max(max_epochs - 1, 0)))
    best_state = model.state()
    best_acc, best_loss = -math.inf, math.inf
    for epoch in range(max_epochs):
        model.train()
        tot_loss, tot_correct, seen = 0.0, 0, 0
        for idx in batches(n_train, cfg.batch_size, rng):
            model.zero_grad()
            loss, correct = step(idx, epoch)
            if not math.isfinite(loss) or not all(np.isfinite(p.grad).all() for p in params):
                rep.diverged = True
                break
            opt.step()
            tot_loss += loss * idx.size
            tot_correct += correct
            seen += idx.size
        if rep.diverged:
            rep.stopped_epoch = epoch
            break
        model.eval()
        val_acc, val_loss, detail = validate()
        rep.train_loss.append(tot_loss / max(seen, 1))
        rep.train_acc.append(tot_correct / max(seen, 1))
        rep.val_acc.append(val_acc)
        rep.val_loss.append(val_loss)
        rep.val_detail.append(detail)
        rep.stopped_epoch = epoch
        improved = val_acc > best_acc or (loss_tiebreak and val_acc == best_acc and val_loss < best_loss)
        if epoch >= rep.select_from and improved:
            best_acc, best_loss = val_acc, val_loss
            rep.best_epoch = epoch
            best_state = model.state()
        opt.lr_scale = sched.step(epoch, val_acc)
        if on_epoch is not None:
            on_epoch(epoch, val_acc)
        if epoch - max(rep.best_epoch, rep.select_from) > patience:
            break
    model.load_state(best_state)
    model.eval()
    rep.wall_time = time.perf_counter() - t0
    return rep


def _dnn_loss(cfg: DnnConfig, logits, y):
    if cfg.loss == "focal":
        return F.focal_loss(logits, y, cfg.focal_gamma)
    return F.softmax_ce_ls(logits, y, cfg.ls_alpha)


def train_dnn(model: ResidualMLP, x_train, y_train, x_val, y_val, max_epochs: int = 150,
              patience: int = 20, seed: int = 0, on_epoch: EpochHook | None = None) -> TrainReport:
    cfg = model.cfg

    def step(idx, epoch):
        logits = model.forward(x_train[idx])
        loss, grad = _dnn_loss(cfg, logits, y_train[idx])
        model.backward(grad)
        return loss, int((logits.argmax(1) == y_train[idx]).sum())

    def validate():
        logits = model.logits(x_val)
        return accuracy(logits, y_val), _dnn_loss(cfg, logits, y_val)[0], {}

    return fit(model, step, validate, len(x_train), cfg, max_epochs, patience, seed, on_epoch=on_epoch)


def domain_mean_accuracy(logits, y, d) -> tuple[float, dict]:
    """Equal-weight mean of per-domain accuracies (domains present in ``d``)."""
    per = {}
    for dom in np.unique(d):
        m = d == dom
        per[f"acc_d{int(dom)}"] = accuracy(logits[m], y[m])
    return (float(np.mean(list(per.values()))) if per else 0.0), per


def train_vae(model: ClassifierVAE, x_train, y_train, x_val, y_val, d_val=None, max_epochs: int = 150,
              patience: int = 20, seed: int = 0, on_epoch: EpochHook | None = None) -> TrainReport:
    """Joint encoder/decoder/head training.

    With ``d_val`` the selection metric is the mean of per-domain validation
    accuracies; otherwise plain validation accuracy.
    """
    cfg: VaeConfig = model.cfg
    noise = np.random.default_rng([seed, 1])

    def step(idx, epoch):
        x = x_train[idx]
        out = model.forward(x, rng=noise)
        b = beta_warmup(cfg.beta, cfg.beta_warmup, epoch)
        L = vae_loss(x, out.x_rec, out.mu, out.logvar, out.logits, y_train[idx], b, cfg.lambda_rcst, cfg.lambda_clf)
        model.backward(L.g_xrec, L.g_logits, L.g_mu, L.g_logvar)
        return L.total, int((out.logits.argmax(1) == y_train[idx]).sum())

    def validate():
        mu, logvar = model.latent_params(x_val)
        logits = model.head.forward(mu)
        ce = F.cross_entropy(logits, y_val)[0] if len(y_val) else 0.0
        kl = F.gaussian_kl(mu, logvar)[0] if len(y_val) else 0.0
        if d_val is not None:
            acc, detail = domain_mean_accuracy(logits, y_val, d_val)
        else:
            acc, detail = accuracy(logits, y_val), {}
        detail = dict(detail, kl=kl)
        return acc, ce, detail

    # before the ramp ends the model is not yet trained on its configured objective
    return fit(model, step, validate, len(x_train), cfg, max_epochs, patience, seed, on_epoch=on_epoch,
               select_from=cfg.beta_warmup)


def train_vae_single(model, x_train, y_train, x_val, y_val, **kw) -> TrainReport:
    return train_vae(model, x_train, y_train, x_val, y_val, None, **kw)


def train_vae_combined_phase1(model, x_train, y_train, x_val, y_val, d_val, **kw) -> TrainReport:
    return train_vae(model, x_train, y_train, x_val, y_val, d_val, **kw)


class _HeadOnly(Module):
    """Wraps a fresh head so the generic loop sees only head parameters."""

    def __init__(self, head):
        self.head = head

    def forward(self, x):
        return self.head.forward(x)

    def backward(self, g):
        return self.head.backward(g)


def train_head_phase2(model: ClassifierVAE, x_train, y_train, x_val, y_val, max_epochs: int = 150,
                      patience: int = 20, seed: int = 0):
    """Fit a freshly initialised head on latent means of source-domain rows.

    The encoder only runs forward in eval mode, so its parameters and
    running statistics are untouched. Returns ``(head, report)``.
    """
    cfg = model.cfg
    mu_train = model.latent_mean(x_train)
    mu_val = model.latent_mean(x_val)
    head = make_head(cfg.latent_dim, cfg.activation, np.random.default_rng([seed, 2]))
    wrapper = _HeadOnly(head)

    def step(idx, epoch):
        logits = head.forward(mu_train[idx])
        loss, grad = F.cross_entropy(logits, y_train[idx])
        head.backward(grad)
        return loss, int((logits.argmax(1) == y_train[idx]).sum())

    def validate():
        logits = head.forward(mu_val)
        return accuracy(logits, y_val), F.cross_entropy(logits, y_val)[0], {}

    # source accuracy saturates within a few epochs; the loss picks the widest-margin head among ties
    rep = fit(wrapper, step, validate, len(mu_train), cfg, max_epochs, patience, seed, loss_tiebreak=True)
    return head, rep


def attach_head(model: ClassifierVAE, head) -> "HeadedVAE":
    return HeadedVAE(model, head)


class HeadedVAE:
    """A frozen encoder paired with a scenario-specific head, for evaluation."""

    kind = "vae-head"

    def __init__(self, vae: ClassifierVAE, head):
        self.vae = vae
        self.head = head

    def logits(self, x):
        mu = self.vae.latent_mean(x)
        self.head.eval()
        return self.head.forward(mu) if len(mu) else np.zeros((0, 3))
