from .config import PRESETS, DnnConfig, VaeConfig, preset
from .dnn import ResidualMLP, build_dnn
from .vae import ClassifierVAE, beta_warmup, build_vae, vae_loss
from .training import (HeadedVAE, TrainReport, train_dnn, train_head_phase2, train_vae,
                       train_vae_combined_phase1, train_vae_single)

__all__ = [
    "PRESETS", "DnnConfig", "VaeConfig", "preset", "ResidualMLP", "build_dnn", "ClassifierVAE",
    "beta_warmup", "build_vae", "vae_loss", "HeadedVAE", "TrainReport", "train_dnn",
    "train_head_phase2", "train_vae", "train_vae_combined_phase1", "train_vae_single",
]
