"""Confusion matrices, per-scenario metric reports and their hashes."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..dataprep import SCENARIOS, LabeledDataset, NormStats, SplitManifest, zscore_apply
from ..tracesim import EventClass

LABELS = tuple(c.label for c in EventClass)
N_CLASSES = len(LABELS)


def manifest_digest(manifest: SplitManifest) -> str:
    blob = json.dumps(manifest.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def model_digest(model) -> str:
    """sha256 over every parameter and buffer (encoder plus head for a headed VAE)."""
    from .. import container

    if hasattr(model, "vae"):
        state = {f"vae.{k}": v for k, v in model.vae.state().items()}
        state.update({f"head.{k}": v for k, v in model.head.state().items()})
    else:
        state = model.state()
    return container.array_digest(state)


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (N_CLASSES, N_CLASSES) or (c < 0).any():
            raise ValueError(f"confusion counts must be a non-negative {N_CLASSES}x{N_CLASSES} array")
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        np.add.at(counts, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def percentages(self) -> list[list[float | None]]:
        """Row-normalised percentages; rows without samples are ``None``."""
        out = []
        for row, n in zip(self.counts, self.row_totals):
            out.append([float(100.0 * v / n) for v in row] if n else [None] * N_CLASSES)
        return out

    def per_class(self) -> dict[str, float | None]:
        return {lab: (float(self.counts[i, i] / n) if n else None)
                for i, (lab, n) in enumerate(zip(LABELS, self.row_totals))}


@dataclass
class MetricsReport:
    scenario: str
    model: str
    accuracy: float
    per_class: dict
    confusion: list
    n_test: int
    checkpoint_hash: str
    manifest_hash: str
    normalization: str = "train-domain"
    extra: dict = field(default_factory=dict)

    @property
    def matrix(self) -> ConfusionMatrix:
        return ConfusionMatrix(np.array(self.confusion))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**d)


def evaluate(model, data: LabeledDataset, manifest: SplitManifest, scenario: str, stats: NormStats,
             model_id: str, normalization: str = "train-domain", expected_manifest_hash: str | None = None,
             extra: dict | None = None) -> MetricsReport:
    """Score ``model`` on the scenario's test view of raw ``data``.

    ``stats`` normalises the test rows. ``model.logits`` must run in eval
    mode. When ``expected_manifest_hash`` is given it must match the
    manifest, so reports cannot silently mix splits.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    digest = manifest_digest(manifest)
    if expected_manifest_hash is not None and expected_manifest_hash != digest:
        raise ValueError(f"manifest hash mismatch: expected {expected_manifest_hash[:12]}, got {digest[:12]}")
    test = manifest.indices("test")
    rows = test[data.d[test] == SCENARIOS[scenario][1]]
    x = zscore_apply(stats, data.features[rows])
    pred = model.logits(x).argmax(axis=1) if rows.size else np.zeros(0, dtype=np.int64)
    cm = ConfusionMatrix.from_predictions(data.y[rows], pred)
    return MetricsReport(
        scenario=scenario, model=model_id, accuracy=cm.accuracy, per_class=cm.per_class(),
        confusion=cm.counts.tolist(), n_test=int(rows.size), checkpoint_hash=model_digest(model),
        manifest_hash=digest, normalization=normalization, extra=dict(extra or {}),
    )


def per_class_breakdown(report: MetricsReport) -> list[dict]:
    """One row per class: count, correct, accuracy (``None`` when the class is absent)."""
    counts = np.asarray(report.confusion)
    rows = []
    for i, lab in enumerate(LABELS):
        n = int(counts[i].sum())
        rows.append({
            "class": lab, "n": n, "correct": int(counts[i, i]),
            "accuracy": float(counts[i, i] / n) if n else None,
            "predicted": {LABELS[j]: int(counts[i, j]) for j in range(N_CLASSES)},
        })
    return rows
