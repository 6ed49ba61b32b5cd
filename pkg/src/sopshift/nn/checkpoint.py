"""Checkpoint files: JSON header plus a float64 blob of every parameter and buffer."""

from __future__ import annotations

from pathlib import Path
from typing import Any

from .. import container
from .layers import Module


def state_digest(module: Module) -> str:
    return container.array_digest(module.state())


def save(module: Module, path: str | Path, header: dict[str, Any]) -> str:
    state = module.state()
    container.write(path, {"kind": "checkpoint", **header}, state)
    return container.array_digest(state)


def read(path: str | Path):
    header, arrays = container.read(path)
    if header.get("kind") != "checkpoint":
        raise ValueError(f"{path}: not a checkpoint")
    return header, arrays
