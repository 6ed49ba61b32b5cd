"""Per-epoch learning-rate multipliers."""

from __future__ import annotations

import math

SCHEDULES = ("constant", "plateau", "cosine", "warmup_cosine", "one_cycle")


class Schedule:
    """Call :meth:`step` once per finished epoch; read :attr:`multiplier` for the next one."""

    multiplier = 1.0

    def step(self, epoch: int, val_metric: float | None = None) -> float:
        return self.multiplier


class Constant(Schedule):
    pass


class Plateau(Schedule):
    """Halve the rate once the metric has failed to improve for more than ``patience`` epochs."""

    factor = 0.5

    def __init__(self, patience: int = 10, mode: str = "max"):
        if mode not in ("max", "min"):
            raise ValueError("mode must be 'max' or 'min'")
        self.patience = patience
        self.mode = mode
        self.best: float | None = None
        self.bad_epochs = 0
        self.multiplier = 1.0

    def step(self, epoch, val_metric=None):
        if val_metric is None:
            return self.multiplier
        better = self.best is None or (val_metric > self.best if self.mode == "max" else val_metric < self.best)
        if better:
            self.best = val_metric
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs > self.patience:
                self.multiplier *= self.factor
                self.bad_epochs = 0
        return self.multiplier


def cosine_multiplier(epoch: float, total: float) -> float:
    e = min(max(epoch, 0.0), total)
    return 0.5 * (1.0 + math.cos(math.pi * e / total))


class Cosine(Schedule):
    def __init__(self, total_epochs: int):
        self.total = max(1, total_epochs)
        self.multiplier = 1.0

    def at(self, epoch: int) -> float:
        return cosine_multiplier(epoch, self.total)

    def step(self, epoch, val_metric=None):
        self.multiplier = self.at(epoch + 1)
        return self.multiplier


class WarmupCosine(Schedule):
    """Linear ramp reaching the base rate at epoch ``warmup - 1``, cosine decay after."""

    def __init__(self, warmup: int, total_epochs: int):
        self.warmup = max(0, int(warmup))
        self.total = max(self.warmup + 1, total_epochs)
        self.multiplier = self.at(0)

    def at(self, epoch: int) -> float:
        if epoch < self.warmup:
            return (epoch + 1) / self.warmup
        return cosine_multiplier(epoch - self.warmup, self.total - self.warmup)

    def step(self, epoch, val_metric=None):
        self.multiplier = self.at(epoch + 1)
        return self.multiplier


class OneCycle(Schedule):
    """Linear rise from base/25 to base over 30% of the budget, cosine back down to base/25."""

    ramp_fraction = 0.3
    floor = 1.0 / 25.0

    def __init__(self, total_epochs: int):
        self.total = max(2, total_epochs)
        self.peak_epoch = self.ramp_fraction * self.total
        self.multiplier = self.at(0)

    def at(self, epoch: int) -> float:
        lo = self.floor
        if epoch <= self.peak_epoch:
            return lo + (1.0 - lo) * epoch / self.peak_epoch
        return lo + (1.0 - lo) * cosine_multiplier(epoch - self.peak_epoch, self.total - self.peak_epoch)

    def step(self, epoch, val_metric=None):
        self.multiplier = self.at(epoch + 1)
        return self.multiplier


def make_schedule(kind: str, total_epochs: int, patience: int = 10, warmup: int = 0) -> Schedule:
    if kind == "constant":
        return Constant()
    if kind == "plateau":
        return Plateau(patience)
    if kind == "cosine":
        return Cosine(total_epochs)
    if kind == "warmup_cosine":
        return WarmupCosine(warmup, total_epochs)
    if kind == "one_cycle":
        return OneCycle(total_epochs)
    raise ValueError(f"unknown schedule {kind!r}; expected one of {SCHEDULES}")
