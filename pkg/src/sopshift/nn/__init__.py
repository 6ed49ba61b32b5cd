"""Minimal float64 dense-network core with hand-written backward passes."""

from . import functional
from .layers import (Activation, BatchNorm, Dense, Dropout, Module, Parameter, ResidualBlock,
                     Sequential, fc_block)
from .optim import OPTIMIZERS, make_optimizer
from .schedules import SCHEDULES, make_schedule

__all__ = [
    "Activation", "BatchNorm", "Dense", "Dropout", "Module", "Parameter", "ResidualBlock",
    "Sequential", "fc_block", "functional", "make_optimizer", "make_schedule", "OPTIMIZERS", "SCHEDULES",
]
