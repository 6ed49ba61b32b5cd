"""Save and reload trained models; the header carries enough to rebuild the graph."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..nn import checkpoint
from .config import DnnConfig, VaeConfig
from .dnn import ResidualMLP
from .training import HeadedVAE
from .vae import ClassifierVAE, make_head


def save_model(model, path: str | Path, extra: dict | None = None) -> str:
    """Write ``model`` (DNN, VAE, or VAE with a phase-2 head) and return its state digest."""
    header = {"model": model.kind, "extra": dict(extra or {})}
    if isinstance(model, HeadedVAE):
        header.update(config=model.vae.cfg.to_dict(), seed=model.vae.seed)
        state = {f"vae.{k}": v for k, v in model.vae.state().items()}
        state.update({f"head.{k}": v for k, v in model.head.state().items()})
        from .. import container

        container.write(path, {"kind": "checkpoint", **header}, state)
        return container.array_digest(state)
    header.update(config=model.cfg.to_dict(), seed=model.seed)
    return checkpoint.save(model, path, header)


def load_model(path: str | Path):
    header, arrays = checkpoint.read(path)
    kind = header.get("model")
    if kind == "dnn":
        model = ResidualMLP(DnnConfig.from_dict(header["config"]), header["seed"])
        model.load_state(arrays)
    elif kind in ("vae", "vae-head"):
        cfg = VaeConfig.from_dict(header["config"])
        vae = ClassifierVAE(cfg, header["seed"])
        if kind == "vae":
            vae.load_state(arrays)
            model = vae
        else:
            vae.load_state({k[4:]: v for k, v in arrays.items() if k.startswith("vae.")})
            head = make_head(cfg.latent_dim, cfg.activation, np.random.default_rng(0))
            head.load_state({k[5:]: v for k, v in arrays.items() if k.startswith("head.")})
            model = HeadedVAE(vae, head)
    else:
        raise ValueError(f"{path}: unknown model kind {kind!r}")
    if hasattr(model, "eval"):
        model.eval()
    return model, header
