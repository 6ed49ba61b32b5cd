"""Model configurations, their validity ranges, and the named presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..nn.functional import ACTIVATIONS

INPUT_DIM = 512
N_CLASSES = 3
BATCH_SIZES = (32, 64, 128, 256)
LATENT_DIMS = (8, 16, 32, 64, 128, 256)


def _in(name, value, lo, hi):
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value!r} outside [{lo}, {hi}]")


def _momentum_check(optimizer, momentum):
    if optimizer in ("sgd_nesterov", "rmsprop"):
        if momentum is None:
            raise ValueError(f"{optimizer} needs a momentum value")
        _in("momentum", momentum, 0.80, 0.99)


class _Config:
    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict):
        names = {f.name for f in fields(cls)}
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items() if k in names}
        return cls(**kwargs)


@dataclass(frozen=True)
class DnnConfig(_Config):
    widths: tuple[int, ...] = (256, 64, 64, 64, 64)
    activation: str = "silu"
    dropout: float = 0.2
    loss: str = "ce_ls"  # or "focal"
    ls_alpha: float = 0.0
    focal_gamma: float = 2.0
    optimizer: str = "adamw"
    lr: float = 1e-3
    weight_decay: float = 1e-5
    momentum: float | None = None
    schedule: str = "plateau"  # or "warmup_cosine"
    warmup_epochs: int = 5
    plateau_patience: int = 10
    batch_size: int = 64
    skip_projection: bool = False

    def __post_init__(self):
        w = self.widths
        _in("n_blocks", len(w), 2, 5)
        if w[0] % 64 or not 256 <= w[0] <= 768:
            raise ValueError(f"first width {w[0]} not in {{256, 320, ..., 768}}")
        for a, b in zip(w, w[1:]):
            if not 0 < b <= a:
                raise ValueError(f"block widths must be positive and non-increasing, got {w}")
        if self.activation not in ("gelu", "relu", "elu", "silu"):
            raise ValueError(f"activation {self.activation!r} not in the DNN space")
        _in("dropout", self.dropout, 0.10, 0.50)
        if self.loss not in ("ce_ls", "focal"):
            raise ValueError(f"unknown loss {self.loss!r}")
        _in("ls_alpha", self.ls_alpha, 0.0, 0.15)
        _in("focal_gamma", self.focal_gamma, 0.5, 5.0)
        if self.optimizer not in ("adamw", "sgd_nesterov", "rmsprop"):
            raise ValueError(f"optimizer {self.optimizer!r} not in the DNN space")
        _in("lr", self.lr, 1e-4, 5e-3)
        _in("weight_decay", self.weight_decay, 1e-6, 1e-3)
        _momentum_check(self.optimizer, self.momentum)
        if self.schedule not in ("warmup_cosine", "plateau"):
            raise ValueError(f"schedule {self.schedule!r} not in the DNN space")
        _in("warmup_epochs", self.warmup_epochs, 5, 20)
        if self.batch_size not in BATCH_SIZES:
            raise ValueError(f"batch_size {self.batch_size} not in {BATCH_SIZES}")

    @property
    def n_blocks(self) -> int:
        return len(self.widths)


@dataclass(frozen=True)
class VaeConfig(_Config):
    hidden: tuple[int, ...] = (256, 128)
    latent_dim: int = 32
    activation: str = "relu"
    batch_norm: bool = True
    dropout: float = 0.1
    beta: float = 0.1
    lambda_rcst: float = 1.0
    lambda_clf: float = 1.0
    beta_warmup: int = 0
    optimizer: str = "adam"
    lr: float = 1e-3
    weight_decay: float = 1e-5
    momentum: float | None = None
    batch_size: int = 64
    schedule: str = "plateau"  # plateau | cosine | one_cycle
    plateau_patience: int = 10
    head_layers: int = 2

    def __post_init__(self):
        _in("n_layers", len(self.hidden), 1, 4)
        for w in self.hidden:
            if w % 64 or not 64 <= w <= 768:
                raise ValueError(f"hidden width {w} not in {{64, 128, ..., 768}}")
        if self.latent_dim not in LATENT_DIMS:
            raise ValueError(f"latent_dim {self.latent_dim} not in {LATENT_DIMS}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        _in("dropout", self.dropout, 0.0, 0.6)
        _in("beta", self.beta, 1e-4, 5.0)
        _in("lambda_rcst", self.lambda_rcst, 0.01, 5.0)
        _in("lambda_clf", self.lambda_clf, 0.1, 5.0)
        _in("beta_warmup", self.beta_warmup, 0, 60)
        if self.optimizer not in ("adamw", "adam", "sgd_nesterov", "rmsprop"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        _in("lr", self.lr, 1e-5, 1e-2)
        _in("weight_decay", self.weight_decay, 1e-7, 1e-2)
        _momentum_check(self.optimizer, self.momentum)
        if self.batch_size not in BATCH_SIZES:
            raise ValueError(f"batch_size {self.batch_size} not in {BATCH_SIZES}")
        if self.schedule not in ("plateau", "cosine", "one_cycle"):
            raise ValueError(f"schedule {self.schedule!r} not in the VAE space")
        if self.head_layers != 2:
            raise ValueError("the classification head has exactly 2 layers")

    @property
    def n_layers(self) -> int:
        return len(self.hidden)


PRESETS = {
    "dnn-sys1": DnnConfig(
        widths=(256, 64, 64, 64, 64), activation="silu", dropout=0.233, loss="ce_ls", ls_alpha=0.085,
        optimizer="sgd_nesterov", lr=3.36e-3, weight_decay=1.54e-6, momentum=0.803,
        schedule="plateau", batch_size=32,
    ),
    "dnn-sys2": DnnConfig(
        widths=(704, 368, 92), activation="silu", dropout=0.267, loss="ce_ls", ls_alpha=0.082,
        optimizer="adamw", lr=3.84e-4, weight_decay=3.99e-6, schedule="plateau", batch_size=128,
    ),
    "vae-sgl-sys1": VaeConfig(
        hidden=(704, 640), latent_dim=32, activation="gelu", batch_norm=True, dropout=0.445,
        beta=0.100, lambda_rcst=3.886, lambda_clf=3.248, beta_warmup=43,
        optimizer="adamw", lr=2.96e-4, weight_decay=3.27e-6, schedule="plateau", batch_size=256,
    ),
    "vae-sgl-sys2": VaeConfig(
        hidden=(384, 320, 320, 192), latent_dim=32, activation="silu", batch_norm=True, dropout=0.167,
        beta=0.294, lambda_rcst=2.530, lambda_clf=1.414, beta_warmup=23,
        optimizer="adam", lr=1.62e-3, weight_decay=9.10e-5, schedule="plateau", batch_size=256,
    ),
    "vae-cmb": VaeConfig(
        hidden=(128, 768, 768), latent_dim=32, activation="relu", batch_norm=True, dropout=0.114,
        beta=0.279, lambda_rcst=1.161, lambda_clf=2.372, beta_warmup=34,
        optimizer="adam", lr=1.87e-3, weight_decay=1.42e-4, schedule="cosine", batch_size=64,
    ),
}


def preset(name: str):
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
