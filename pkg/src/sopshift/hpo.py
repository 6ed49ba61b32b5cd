"""Random-search hyperparameter optimisation with a median pruner.

A search space is an ordered list of :class:`ParamSpec`. Each spec draws from
one distribution and may be conditional on an earlier parameter taking one of
a set of values. A spec may also take its upper bound from an earlier
parameter, which is how the non-increasing DNN block widths are expressed.
"""

from __future__ import annotations

import json
import math
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .models.config import BATCH_SIZES, LATENT_DIMS, DnnConfig, VaeConfig
from .nn.functional import ACTIVATIONS


# ---------------------------------------------------------------- distributions


@dataclass(frozen=True)
class Categorical:
    choices: tuple

    def __post_init__(self):
        if not self.choices:
            raise ValueError("Categorical needs at least one choice")

    def sample(self, rng, hi=None):
        return self.choices[int(rng.integers(len(self.choices)))]

    def contains(self, v, hi=None) -> bool:
        return v in self.choices


@dataclass(frozen=True)
class IntStep:
    lo: int
    hi: int
    step: int = 1

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"IntStep needs lo < hi, got {self.lo}, {self.hi}")
        if self.step <= 0 or (self.hi - self.lo) % self.step:
            raise ValueError(f"step {self.step} does not divide [{self.lo}, {self.hi}]")

    def grid(self, hi=None) -> np.ndarray:
        top = self.hi if hi is None else min(self.hi, hi)
        return np.arange(self.lo, top + 1, self.step)

    def sample(self, rng, hi=None):
        g = self.grid(hi)
        if not g.size:
            raise ValueError(f"empty grid below {hi}")
        return int(g[int(rng.integers(g.size))])

    def contains(self, v, hi=None) -> bool:
        top = self.hi if hi is None else min(self.hi, hi)
        return isinstance(v, (int, np.integer)) and self.lo <= v <= top and (v - self.lo) % self.step == 0


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"Uniform needs lo < hi, got {self.lo}, {self.hi}")

    def sample(self, rng, hi=None):
        return float(rng.uniform(self.lo, self.hi))

    def contains(self, v, hi=None) -> bool:
        return self.lo <= v <= self.hi


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError(f"LogUniform needs 0 < lo < hi, got {self.lo}, {self.hi}")

    def sample(self, rng, hi=None):
        return float(math.exp(rng.uniform(math.log(self.lo), math.log(self.hi))))

    def contains(self, v, hi=None) -> bool:
        return self.lo <= v <= self.hi


@dataclass(frozen=True)
class ParamSpec:
    name: str
    dist: Any
    when: tuple[str, tuple] | None = None  # (parent, allowed parent values)
    upper_from: str | None = None

    def active(self, params: dict) -> bool:
        if self.when is None:
            return True
        parent, allowed = self.when
        return parent in params and params[parent] in allowed


Space = Sequence[ParamSpec]


def sample_config(space: Space, rng: np.random.Generator) -> dict:
    """Draw one parameter dict; inactive conditional parameters are omitted."""
    params: dict = {}
    for spec in space:
        if spec.active(params):
            hi = params[spec.upper_from] if spec.upper_from else None
            params[spec.name] = spec.dist.sample(rng, hi)
    return params


def in_space(space: Space, params: dict) -> bool:
    """True when ``params`` is exactly what :func:`sample_config` could produce."""
    seen: dict = {}
    for spec in space:
        if spec.active(seen):
            if spec.name not in params:
                return False
            hi = seen[spec.upper_from] if spec.upper_from else None
            if not spec.dist.contains(params[spec.name], hi):
                return False
            seen[spec.name] = params[spec.name]
        elif spec.name in params:
            return False
    return set(params) == set(seen)


# ---------------------------------------------------------------- spaces

MAX_DNN_BLOCKS = 5
MAX_VAE_LAYERS = 4
_MOMENTUM_OPTS = ("sgd_nesterov", "rmsprop")


def _width_specs(prefix, count_name, n_max, first, rest, chained):
    specs = [ParamSpec(f"{prefix}0", first)]
    for i in range(1, n_max):
        specs.append(ParamSpec(f"{prefix}{i}", rest, when=(count_name, tuple(range(i + 1, n_max + 1))),
                               upper_from=f"{prefix}{i - 1}" if chained else None))
    return specs


DNN_SPACE: tuple[ParamSpec, ...] = (
    ParamSpec("n_blocks", Categorical((2, 3, 4, 5))),
    *_width_specs("width_", "n_blocks", MAX_DNN_BLOCKS, IntStep(256, 768, 64), IntStep(64, 768, 64), True),
    ParamSpec("activation", Categorical(("gelu", "relu", "elu", "silu"))),
    ParamSpec("dropout", Uniform(0.10, 0.50)),
    ParamSpec("loss", Categorical(("ce_ls", "focal"))),
    ParamSpec("ls_alpha", Uniform(0.0, 0.15), when=("loss", ("ce_ls",))),
    ParamSpec("focal_gamma", Uniform(0.5, 5.0), when=("loss", ("focal",))),
    ParamSpec("optimizer", Categorical(("adamw", "sgd_nesterov", "rmsprop"))),
    ParamSpec("lr", LogUniform(1e-4, 5e-3)),
    ParamSpec("weight_decay", LogUniform(1e-6, 1e-3)),
    ParamSpec("momentum", Uniform(0.80, 0.99), when=("optimizer", _MOMENTUM_OPTS)),
    ParamSpec("schedule", Categorical(("warmup_cosine", "plateau"))),
    ParamSpec("warmup_epochs", IntStep(5, 20), when=("schedule", ("warmup_cosine",))),
    ParamSpec("batch_size", Categorical(BATCH_SIZES)),
)

VAE_SPACE: tuple[ParamSpec, ...] = (
    ParamSpec("n_layers", Categorical((1, 2, 3, 4))),
    *_width_specs("hidden_", "n_layers", MAX_VAE_LAYERS, IntStep(64, 768, 64), IntStep(64, 768, 64), False),
    ParamSpec("latent_dim", Categorical(LATENT_DIMS)),
    ParamSpec("activation", Categorical(ACTIVATIONS)),
    ParamSpec("batch_norm", Categorical((True, False))),
    ParamSpec("dropout", Uniform(0.0, 0.6)),
    ParamSpec("beta", LogUniform(1e-4, 5.0)),
    ParamSpec("lambda_rcst", Uniform(0.01, 5.0)),
    ParamSpec("lambda_clf", Uniform(0.1, 5.0)),
    ParamSpec("beta_warmup", IntStep(0, 60)),
    ParamSpec("optimizer", Categorical(("adamw", "adam", "sgd_nesterov", "rmsprop"))),
    ParamSpec("lr", LogUniform(1e-5, 1e-2)),
    ParamSpec("weight_decay", LogUniform(1e-7, 1e-2)),
    ParamSpec("momentum", Uniform(0.80, 0.99), when=("optimizer", _MOMENTUM_OPTS)),
    ParamSpec("batch_size", Categorical(BATCH_SIZES)),
    ParamSpec("schedule", Categorical(("plateau", "cosine", "one_cycle"))),
)


def _collect(params: dict, prefix: str, n: int) -> tuple[int, ...]:
    return tuple(int(params[f"{prefix}{i}"]) for i in range(n))


def dnn_config(params: dict) -> DnnConfig:
    kw = {k: v for k, v in params.items() if not k.startswith("width_") and k != "n_blocks"}
    return DnnConfig(widths=_collect(params, "width_", params["n_blocks"]), **kw)


def vae_config(params: dict) -> VaeConfig:
    kw = {k: v for k, v in params.items() if not k.startswith("hidden_") and k != "n_layers"}
    return VaeConfig(hidden=_collect(params, "hidden_", params["n_layers"]), **kw)


SPACES: dict[str, tuple[Space, Callable[[dict], Any]]] = {
    "dnn": (DNN_SPACE, dnn_config),
    "vae": (VAE_SPACE, vae_config),
}


# ---------------------------------------------------------------- pruning


class TrialPruned(Exception):
    def __init__(self, epoch: int):
        super().__init__(f"pruned at epoch {epoch}")
        self.epoch = epoch


class MedianPruner:
    """Prune a trial whose value is strictly below the median of earlier trials at the same epoch.

    Trials with index below ``n_startup_trials`` and epochs below
    ``n_warmup_steps`` are never pruned. Earlier trials count whether they
    completed or were pruned, as long as they reached the epoch in question.
    """

    def __init__(self, n_startup_trials: int = 10, n_warmup_steps: int = 15):
        self.n_startup_trials = n_startup_trials
        self.n_warmup_steps = n_warmup_steps
        self.history: dict[int, dict[int, float]] = {}

    def report(self, trial: int, epoch: int, value: float) -> None:
        self.history.setdefault(trial, {})[epoch] = float(value)

    def median_at(self, trial: int, epoch: int) -> float | None:
        prior = [h[epoch] for t, h in self.history.items() if t < trial and epoch in h]
        return float(np.median(prior)) if prior else None

    def should_prune(self, trial: int, epoch: int) -> bool:
        if trial < self.n_startup_trials or epoch < self.n_warmup_steps:
            return False
        value = self.history.get(trial, {}).get(epoch)
        med = self.median_at(trial, epoch)
        return value is not None and med is not None and value < med


# ---------------------------------------------------------------- study records


@dataclass
class TrialRecord:
    trial_id: int
    seed: int
    params: dict
    status: str = "running"  # complete | pruned | failed
    objective: float = 0.0
    intermediate: list[float] = field(default_factory=list)
    pruned_epoch: int | None = None
    best_epoch: int | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StudyRecord:
    name: str
    space: str
    objective_kind: str  # source-val-acc | mean-dual-val-acc
    master_seed: int
    trials: list[TrialRecord] = field(default_factory=list)

    @property
    def best_trial(self) -> TrialRecord | None:
        done = [t for t in self.trials if t.status == "complete"]
        # ties go to the earlier trial
        return max(done, key=lambda t: (t.objective, -t.trial_id)) if done else None

    def summary(self) -> dict:
        best = self.best_trial
        counts = {s: sum(t.status == s for t in self.trials) for s in ("complete", "pruned", "failed")}
        return {
            "name": self.name, "space": self.space, "objective_kind": self.objective_kind,
            "master_seed": self.master_seed, "n_trials": len(self.trials), "counts": counts,
            "best_trial": None if best is None else best.trial_id,
            "best_objective": None if best is None else best.objective,
            "best_params": None if best is None else best.params,
        }

    def save(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = out / f"{self.name}.trials.jsonl"
        lines.write_text("".join(json.dumps(t.to_dict(), sort_keys=True) + "\n" for t in self.trials))
        summary = out / f"{self.name}.summary.json"
        summary.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return lines, summary

    @classmethod
    def load(cls, out_dir: str | Path, name: str) -> "StudyRecord":
        out = Path(out_dir)
        meta = json.loads((out / f"{name}.summary.json").read_text())
        rec = cls(meta["name"], meta["space"], meta["objective_kind"], meta["master_seed"])
        for line in (out / f"{name}.trials.jsonl").read_text().splitlines():
            rec.trials.append(TrialRecord(**json.loads(line)))
        return rec


# An objective trains one configuration. It calls ``report(epoch, value)``
# after every epoch (which may raise TrialPruned) and returns the trained
# model's TrainReport-like result with ``objective`` and ``best_epoch``.
Objective = Callable[[dict, int, Callable[[int, float], None]], Any]


def trial_seed(master_seed: int, trial_id: int) -> int:
    return int(np.random.SeedSequence([master_seed, trial_id]).generate_state(1)[0])


def run_study(objective: Objective, space: str, n_trials: int = 100, master_seed: int = 0,
              name: str = "study", objective_kind: str = "source-val-acc",
              pruner: MedianPruner | None = None, out_dir: str | Path | None = None,
              log: Callable[[str], None] | None = None) -> StudyRecord:
    """Run ``n_trials`` sequential random-search trials and record everything.

    Trial ``i`` draws its parameters from ``default_rng([master_seed, i])`` and
    trains with :func:`trial_seed`. Exceptions other than pruning mark the
    trial failed with objective 0; so does a diverged run.
    """
    search, _ = SPACES[space]
    pruner = MedianPruner() if pruner is None else pruner
    study = StudyRecord(name, space, objective_kind, master_seed)
    for i in range(n_trials):
        params = sample_config(search, np.random.default_rng([master_seed, i]))
        rec = TrialRecord(i, trial_seed(master_seed, i), params)
        study.trials.append(rec)

        def report(epoch, value, rec=rec):
            rec.intermediate.append(float(value))
            pruner.report(rec.trial_id, epoch, value)
            if pruner.should_prune(rec.trial_id, epoch):
                raise TrialPruned(epoch)

        try:
            result = objective(params, rec.seed, report)
        except TrialPruned as stop:
            rec.status, rec.pruned_epoch = "pruned", stop.epoch
            rec.objective = max(rec.intermediate) if rec.intermediate else 0.0
        except Exception as exc:  # noqa: BLE001 - a failed trial must not end the study
            rec.status, rec.objective = "failed", 0.0
            rec.error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        else:
            if getattr(result, "diverged", False):
                rec.status, rec.objective, rec.error = "failed", 0.0, "diverged"
            else:
                rec.status, rec.objective = "complete", float(result.objective)
                rec.best_epoch = int(result.best_epoch)
        if log is not None:
            log(f"trial {i}: {rec.status} objective={rec.objective:.4f}")
    if out_dir is not None:
        study.save(out_dir)
    return study


# ---------------------------------------------------------------- objectives

FAMILIES = {"dnn": ("dnn", "source-val-acc"), "vae-sgl": ("vae", "source-val-acc"),
            "vae-cmb": ("vae", "mean-dual-val-acc")}


@dataclass
class StudyData:
    """Normalised arrays for one study; ``d_val`` is required for ``vae-cmb``."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    d_val: np.ndarray | None = None


def build_and_train(family: str, config, data: StudyData, seed: int, max_epochs: int, patience: int,
                    on_epoch=None):
    """Build a fresh model for ``config`` and train it; returns ``(model, report)``."""
    from .models import build_dnn, build_vae, train_dnn, train_vae_combined_phase1, train_vae_single

    common = dict(max_epochs=max_epochs, patience=patience, seed=seed, on_epoch=on_epoch)
    args = (data.x_train, data.y_train, data.x_val, data.y_val)
    if family == "dnn":
        model = build_dnn(config, seed)
        return model, train_dnn(model, *args, **common)
    model = build_vae(config, seed)
    if family == "vae-sgl":
        return model, train_vae_single(model, *args, **common)
    if family == "vae-cmb":
        if data.d_val is None:
            raise ValueError("vae-cmb needs per-row domains for the validation set")
        return model, train_vae_combined_phase1(model, *args, data.d_val, **common)
    raise ValueError(f"unknown model family {family!r}; choose from {sorted(FAMILIES)}")


def make_objective(family: str, data: StudyData, max_epochs: int = 150, patience: int = 20) -> Objective:
    space, _ = FAMILIES[family]
    to_config = SPACES[space][1]

    def objective(params, seed, report):
        return build_and_train(family, to_config(params), data, seed, max_epochs, patience, on_epoch=report)[1]

    return objective


def study(family: str, data: StudyData, n_trials: int = 100, master_seed: int = 0, max_epochs: int = 150,
          patience: int = 20, out_dir=None, name: str | None = None, log=None) -> StudyRecord:
    space, kind = FAMILIES[family]
    return run_study(make_objective(family, data, max_epochs, patience), space, n_trials, master_seed,
                     name or family, kind, out_dir=out_dir, log=log)


def final_retrain(family: str, record: StudyRecord, data: StudyData, seed: int = 0,
                  max_epochs: int = 500, patience: int = 40):
    """Retrain the best trial's configuration from scratch without pruning."""
    best = record.best_trial
    if best is None:
        raise ValueError(f"study {record.name!r} has no completed trial")
    config = SPACES[record.space][1](best.params)
    return build_and_train(family, config, data, seed, max_epochs, patience)
