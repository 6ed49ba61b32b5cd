"""End-to-end experiment: generate, featurise, split, train, evaluate, report.

Each stage is a plain function so the CLI can run them one at a time;
:func:`run_experiment` chains them and records hashes and seeds.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .. import __version__, container, dataprep as dp, featurizer as fz, hpo, tracesim as ts
from ..models import preset, train_head_phase2
from ..models.persist import load_model, save_model
from ..models.training import HeadedVAE
from ..nn.checkpoint import state_digest
from .diagnostic import pca_shift_diagnostic
from .metrics import MetricsReport, evaluate, manifest_digest
from .report import emit_report

SCHEMA_VERSION = 1

# checkpoint key -> (model family, preset, training domains)
MODEL_KEYS = {
    "dnn_sys1": ("dnn", "dnn-sys1", (0,)),
    "dnn_sys2": ("dnn", "dnn-sys2", (1,)),
    "vae_sgl_sys1": ("vae-sgl", "vae-sgl-sys1", (0,)),
    "vae_sgl_sys2": ("vae-sgl", "vae-sgl-sys2", (1,)),
    "vae_cmb": ("vae-cmb", "vae-cmb", (0, 1)),
}
PRESET_KEYS = {p: k for k, (_, p, _) in MODEL_KEYS.items()}
NORMALIZATION = {"DNN": "train-domain", "VAE_sgl": "train-domain", "VAE_cmb": "combined"}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage


@dataclass
class ExperimentConfig:
    schema: int = SCHEMA_VERSION
    seed: int = 0
    shift: float = 1.0
    rows_per_event: int = 500
    activity_quantile: float = 0.95
    ratios: tuple = dp.DEFAULT_RATIOS
    mode: str = "preset"  # preset | hpo
    max_epochs: int = 150
    patience: int = 20
    cmb_epochs: int = 150
    head_epochs: int = 150
    head_patience: int = 20
    hpo_trials: int = 100
    final_epochs: int = 500
    final_patience: int = 40
    save_traces: bool = False

    def __post_init__(self):
        if self.schema != SCHEMA_VERSION:
            raise ValueError(f"config schema {self.schema} is not supported (expected {SCHEMA_VERSION})")
        if self.mode not in ("preset", "hpo"):
            raise ValueError(f"mode must be 'preset' or 'hpo', got {self.mode!r}")
        self.ratios = tuple(self.ratios)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratios"] = list(self.ratios)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def quick_config(seed: int = 0) -> ExperimentConfig:
    """Desk-scale settings: 500 rows per (system, event), preset models, no search."""
    return ExperimentConfig(seed=seed, max_epochs=60, patience=20, cmb_epochs=60, head_epochs=100)


def model_seed(seed: int, name: str) -> int:
    return int(np.random.SeedSequence([seed, *name.encode()]).generate_state(1)[0] % (2**31))


# ---------------------------------------------------------------- data stages


def generate(shift: float, rows_per_event: int, seed: int) -> list[ts.PolarimetricTrace]:
    pair = ts.make_shift_pair(shift, seed=seed)
    return ts.generate_corpus(pair, n_samples_per_event=ts.samples_for_rows(rows_per_event), seed=seed)


def filter_activity(sigs, quantile: float = 0.95):
    """Keep System-2 eav/sbd rows above the System-2 rlx energy quantile."""
    base = {s.system_id: s for s in sigs if s.event == ts.EventClass.RLX}
    if 2 not in base:
        raise ValueError("activity filtering needs the System-2 rlx signature")
    return [dp.activity_filter(s, base[2], quantile) if s.system_id == 2 and s.event != ts.EventClass.RLX else s
            for s in sigs]


def prepare(sigs, quantile: float, ratios, seed: int) -> tuple[dp.LabeledDataset, dp.SplitManifest]:
    ds = dp.LabeledDataset.from_signatures(filter_activity(sigs, quantile))
    return ds, dp.stratified_split(ds, ratios, seed)


def norm_stats(ds: dp.LabeledDataset, man: dp.SplitManifest) -> dict[str, dp.NormStats]:
    """Train-split z-score statistics for each system and for both combined."""
    return {
        "sys1": dp.zscore_fit(ds.features[dp.domain_rows(ds, man, "train", [0])]),
        "sys2": dp.zscore_fit(ds.features[dp.domain_rows(ds, man, "train", [1])]),
        "combined": dp.zscore_fit(ds.features[man.indices("train")]),
    }


def stats_key(domains) -> str:
    return "combined" if len(domains) > 1 else f"sys{domains[0] + 1}"


def save_prep(ds, man, data_dir: str | Path) -> dict[str, dp.NormStats]:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    stats = norm_stats(ds, man)
    ds.save(data_dir / "dataset.sopc")
    man.save(data_dir / "split_manifest.json")
    (data_dir / "norm_stats.json").write_text(
        json.dumps({k: v.to_dict() for k, v in stats.items()}, sort_keys=True) + "\n")
    return stats


def load_prep(data_dir: str | Path):
    data_dir = Path(data_dir)
    ds = dp.LabeledDataset.load(data_dir / "dataset.sopc")
    man = dp.SplitManifest.load(data_dir / "split_manifest.json")
    raw = json.loads((data_dir / "norm_stats.json").read_text())
    return ds, man, {k: dp.NormStats.from_dict(v) for k, v in raw.items()}


def study_data(ds, man, stats, domains) -> hpo.StudyData:
    st = stats[stats_key(domains)]
    tr = dp.domain_rows(ds, man, "train", domains)
    va = dp.domain_rows(ds, man, "val", domains)
    d_val = ds.d[va] if len(domains) > 1 else None
    return hpo.StudyData(dp.zscore_apply(st, ds.features[tr]), ds.y[tr],
                         dp.zscore_apply(st, ds.features[va]), ds.y[va], d_val)


# ---------------------------------------------------------------- model stages


def train_key(key: str, ds, man, stats, cfg: ExperimentConfig, models_dir: str | Path,
              log: Callable[[str], None] | None = None) -> dict:
    """Train one model (preset or searched) and save ``<key>.ckpt``; returns training metadata."""
    family, preset_name, domains = MODEL_KEYS[key]
    data = study_data(ds, man, stats, domains)
    seed = model_seed(cfg.seed, key)
    models_dir = Path(models_dir)
    models_dir.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "hpo":
        record = hpo.study(family, data, cfg.hpo_trials, seed, cfg.max_epochs, cfg.patience,
                           out_dir=models_dir.parent / "studies", name=key, log=log)
        model, rep = hpo.final_retrain(family, record, data, seed, cfg.final_epochs, cfg.final_patience)
    else:
        epochs = cfg.cmb_epochs if family == "vae-cmb" else cfg.max_epochs
        model, rep = hpo.build_and_train(family, preset(preset_name), data, seed, epochs, cfg.patience)
    digest = save_model(model, models_dir / f"{key}.ckpt", {"report": rep.to_dict()})
    return {"seed": seed, "digest": digest, "best_epoch": rep.best_epoch, "stopped_epoch": rep.stopped_epoch,
            "best_val_acc": rep.best_val_acc, "diverged": rep.diverged}


def train_heads(vae, ds, man, stats, cfg: ExperimentConfig, models_dir: str | Path) -> dict:
    """Phase 2: one fresh head per scenario on the frozen encoder; verifies the freeze."""
    before = state_digest(vae)
    st = stats["combined"]
    meta = {}
    for name, view in dp.scenario_views(ds, man).items():
        head, rep = train_head_phase2(
            vae, dp.zscore_apply(st, ds.features[view.train]), ds.y[view.train],
            dp.zscore_apply(st, ds.features[view.val]), ds.y[view.val],
            max_epochs=cfg.head_epochs, patience=cfg.head_patience, seed=model_seed(cfg.seed, f"head_{name}"))
        key = f"vae_cmb_head_{name}"
        digest = save_model(HeadedVAE(vae, head), Path(models_dir) / f"{key}.ckpt", {"report": rep.to_dict()})
        meta[key] = {"digest": digest, "best_epoch": rep.best_epoch, "best_val_acc": rep.best_val_acc}
    after = state_digest(vae)
    if before != after:
        raise RuntimeError("encoder parameters changed during phase-2 head training")
    meta["encoder_digest"] = after
    return meta


def evaluate_all(models_dir: str | Path, ds, man, stats) -> list[MetricsReport]:
    """Score every saved model on its scenarios: 12 reports for a full run."""
    models_dir = Path(models_dir)
    mhash = manifest_digest(man)
    reports = []
    cache: dict[str, object] = {}

    def get(key):
        if key not in cache:
            cache[key] = load_model(models_dir / f"{key}.ckpt")[0]
        return cache[key]

    for name, (src, _) in dp.SCENARIOS.items():
        sys_key = f"sys{src + 1}"
        for model_id, key, st in (("DNN", f"dnn_{sys_key}", sys_key), ("VAE_sgl", f"vae_sgl_{sys_key}", sys_key),
                                  ("VAE_cmb", f"vae_cmb_head_{name}", "combined")):
            if (models_dir / f"{key}.ckpt").exists():
                reports.append(evaluate(get(key), ds, man, name, stats[st], model_id, NORMALIZATION[model_id],
                                        expected_manifest_hash=mhash))
    return reports


def shift_diagnostic(ds, man, seed: int = 0):
    tr = man.indices("train")
    return pca_shift_diagnostic(ds.features[tr], ds.d[tr], ds.y[tr], n_per_system=500, seed=seed)


# ---------------------------------------------------------------- orchestration


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path, log: Callable[[str], None] | None = None) -> dict:
    """Run every stage and write the artifact tree under ``out_dir``.

    Layout: ``data/`` (features, dataset, split manifest, normalisation
    stats), ``models/`` (checkpoints), ``studies/`` (hpo mode only),
    ``reports/`` (metrics and figures) and ``manifest.json``. Metrics and
    figures carry no timings, so a rerun with the same config reproduces
    them byte for byte. A failing stage is re-raised as :class:`StageError`.
    """
    say = log or (lambda msg: None)
    out = Path(out_dir)
    data_dir, models_dir = out / "data", out / "models"
    timings: dict[str, float] = {}

    def run(stage, fn):
        t0 = time.perf_counter()
        say(f"[{stage}] start")
        try:
            result = fn()
        except Exception as exc:
            raise StageError(stage, exc) from exc
        timings[stage] = round(time.perf_counter() - t0, 3)
        say(f"[{stage}] done in {timings[stage]:.1f}s")
        return result

    traces = run("generate", lambda: generate(cfg.shift, cfg.rows_per_event, cfg.seed))
    sigs = run("featurize", lambda: [fz.featurize_trace(t) for t in traces])
    ds, man = run("prep", lambda: prepare(sigs, cfg.activity_quantile, cfg.ratios, cfg.seed))

    def persist():
        data_dir.mkdir(parents=True, exist_ok=True)
        if cfg.save_traces:
            for t in traces:
                ts.save_trace(t, data_dir / f"{t.name}.trace")
        for s in sigs:
            fz.save_signature(s, data_dir / f"{s.name}.features")
        return save_prep(ds, man, data_dir)

    stats = run("persist", persist)
    digests = {
        "traces": container.array_digest({t.name: np.concatenate([t.i1, t.i2]) for t in traces}),
        "features": container.array_digest({"features": ds.features}),
        "manifest": manifest_digest(man),
    }

    def train_all():
        meta = {key: train_key(key, ds, man, stats, cfg, models_dir, say) for key in MODEL_KEYS}
        vae = load_model(models_dir / "vae_cmb.ckpt")[0]
        meta["phase2"] = train_heads(vae, ds, man, stats, cfg, models_dir)
        return meta

    train_meta = run("train", train_all)
    reports = run("evaluate", lambda: evaluate_all(models_dir, ds, man, stats))
    diag = run("diagnostic", lambda: shift_diagnostic(ds, man, cfg.seed))
    meta = {"config": cfg.to_dict(), "version": __version__, "digests": digests, "normalization": NORMALIZATION}
    files = run("report", lambda: emit_report(reports, out / "reports", diag, meta))

    manifest = {
        "config": cfg.to_dict(),
        "version": __version__,
        "inputs": digests,
        "rows": {s.name: s.rows for s in filter_activity(sigs, cfg.activity_quantile)},
        "training": train_meta,
        "reports": {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in files},
        "accuracy": {f"{r.model}/{r.scenario}": r.accuracy for r in reports},
        "shift_silhouette": diag.silhouette,
        "timings_s": timings,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
