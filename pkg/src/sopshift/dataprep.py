"""Activity filtering, stratified splitting on (event, domain), z-scoring, scenario views."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import container
from .featurizer import SpectralSignature

STD_FLOOR = 1e-12
DEFAULT_RATIOS = (0.70, 0.15, 0.15)
SPLITS = ("train", "val", "test")


@dataclass
class LabeledDataset:
    features: np.ndarray
    y: np.ndarray
    d: np.ndarray
    source: np.ndarray  # row -> index into ``sources``
    sources: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.d = np.asarray(self.d, dtype=np.int64)
        self.source = np.asarray(self.source, dtype=np.int64)
        n = self.features.shape[0]
        if not (self.y.shape == self.d.shape == self.source.shape == (n,)):
            raise ValueError("features, y, d and source must have consistent lengths")
        if not np.isfinite(self.features).all():
            raise ValueError("features contain non-finite values")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]

    def take(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.y[idx], self.d[idx], self.source[idx], list(self.sources))

    def with_features(self, features: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(features, self.y, self.d, self.source, list(self.sources))

    def strata(self) -> dict[tuple[int, int], int]:
        keys, counts = np.unique(np.stack([self.y, self.d], axis=1), axis=0, return_counts=True)
        return {(int(k[0]), int(k[1])): int(c) for k, c in zip(keys, counts)}

    @classmethod
    def from_signatures(cls, sigs: Sequence[SpectralSignature]) -> "LabeledDataset":
        feats, y, d, src = [], [], [], []
        for i, s in enumerate(sigs):
            feats.append(s.power)
            y.append(np.full(s.rows, int(s.event)))
            d.append(np.full(s.rows, s.system_id - 1))
            src.append(np.full(s.rows, i))
        width = sigs[0].power.shape[1] if sigs else 0
        return cls(
            np.concatenate(feats) if feats else np.zeros((0, width)),
            np.concatenate(y) if y else np.zeros(0),
            np.concatenate(d) if d else np.zeros(0),
            np.concatenate(src) if src else np.zeros(0),
            [s.name for s in sigs],
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        container.write(path, {"kind": "dataset", "rows": len(self), "cols": self.width},
                        {"features": self.features})
        sidecar = {"y": self.y.tolist(), "d": self.d.tolist(), "source": self.source.tolist(),
                   "sources": self.sources}
        path.with_suffix(".labels.json").write_text(json.dumps(sidecar))

    @classmethod
    def load(cls, path: str | Path) -> "LabeledDataset":
        path = Path(path)
        _, arrays = container.read(path)
        lab = json.loads(path.with_suffix(".labels.json").read_text())
        return cls(arrays["features"], lab["y"], lab["d"], lab["source"], lab["sources"])


def row_energy(power: np.ndarray) -> np.ndarray:
    return power.sum(axis=1)


def activity_filter(sig: SpectralSignature, baseline: SpectralSignature, quantile: float = 0.95) -> SpectralSignature:
    """Keep rows of ``sig`` whose total energy exceeds the ``quantile`` energy of ``baseline``."""
    if not 0.0 < quantile < 1.0:
        raise ValueError(f"quantile must lie in (0, 1), got {quantile}")
    if sig.power.shape[1] != baseline.power.shape[1]:
        raise ValueError("signature and baseline have different widths")
    threshold = np.quantile(row_energy(baseline.power), quantile)
    keep = row_energy(sig.power) > threshold
    return SpectralSignature(sig.power[keep], sig.event, sig.system_id, sig.seed,
                             sig.segment_length, sig.fft_size)


# --- splitting ---------------------------------------------------------------

@dataclass
class SplitManifest:
    train: list[int]
    val: list[int]
    test: list[int]
    ratios: tuple[float, float, float]
    seed: int
    counts: dict[str, dict[str, int]]  # "y,d" -> {"train": n, "val": n, "test": n}

    def indices(self, split: str) -> np.ndarray:
        return np.asarray(getattr(self, split), dtype=np.int64)

    def to_dict(self) -> dict:
        return {"train": self.train, "val": self.val, "test": self.test, "ratios": list(self.ratios),
                "seed": self.seed, "counts": self.counts}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitManifest":
        return cls(list(d["train"]), list(d["val"]), list(d["test"]), tuple(d["ratios"]), d["seed"], d["counts"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "SplitManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _round_half_up(x: float) -> int:
    # the epsilon absorbs 0.15 * 4800 = 720.0000000000001 style artifacts
    return math.floor(x + 0.5 + 1e-9)


def split_counts(strata: dict, ratios: Sequence[float] = DEFAULT_RATIOS) -> dict:
    """Per-stratum (train, val, test) sizes.

    Within each stratum of ``n`` rows the test and validation shares are
    ``round(r * n)`` with halves rounded up, and training keeps the rest,
    so every split is within one row of its exact share. Keys of
    ``strata`` are any sortable labels.
    """
    r_train, r_val, r_test = (float(r) for r in ratios)
    if min(ratios) < 0 or abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise ValueError(f"ratios must be non-negative and sum to 1, got {ratios}")
    out = {}
    for k in sorted(strata):
        n = int(strata[k])
        test = min(n, _round_half_up(r_test * n))
        val = min(n - test, _round_half_up(r_val * n))
        out[k] = (n - test - val, val, test)
    return out


def stratified_split(ds: LabeledDataset, ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0) -> SplitManifest:
    strata = ds.strata()
    for key, c in strata.items():
        if c < 3:
            raise ValueError(f"stratum (y={key[0]}, d={key[1]}) has {c} rows; need at least 3")
    sizes = split_counts(strata, ratios)
    parts = {s: [] for s in SPLITS}
    counts = {}
    for (y, d), (n_tr, n_va, n_te) in sizes.items():
        rows = np.flatnonzero((ds.y == y) & (ds.d == d))
        rng = np.random.default_rng([int(seed), y, d])
        rows = rows[rng.permutation(rows.size)]
        parts["test"].append(rows[:n_te])
        parts["val"].append(rows[n_te : n_te + n_va])
        parts["train"].append(rows[n_te + n_va :])
        counts[f"{y},{d}"] = {"train": n_tr, "val": n_va, "test": n_te}
    out = {s: sorted(int(i) for i in np.concatenate(parts[s])) for s in SPLITS}
    return SplitManifest(out["train"], out["val"], out["test"], tuple(float(r) for r in ratios), int(seed), counts)


# --- normalization -------------------------------------------------------------

@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    n_rows: int

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "n_rows": self.n_rows}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64), d["n_rows"])


def zscore_fit(train: LabeledDataset | np.ndarray) -> NormStats:
    x = train.features if isinstance(train, LabeledDataset) else np.asarray(train, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("cannot fit normalization on an empty training set")
    return NormStats(x.mean(axis=0), np.maximum(x.std(axis=0), STD_FLOOR), x.shape[0])


def zscore_apply(stats: NormStats, ds: LabeledDataset | np.ndarray):
    x = ds.features if isinstance(ds, LabeledDataset) else np.asarray(ds, dtype=np.float64)
    if x.shape[1] != stats.mean.size:
        raise ValueError(f"stats width {stats.mean.size} does not match data width {x.shape[1]}")
    z = (x - stats.mean) / stats.std
    return ds.with_features(z) if isinstance(ds, LabeledDataset) else z


# --- scenarios -------------------------------------------------------------------

SCENARIOS = {"S1": (0, 0), "S2": (1, 1), "S3": (0, 1), "S4": (1, 0)}


@dataclass(frozen=True)
class ScenarioView:
    name: str
    train_domain: int
    test_domain: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def domain_rows(ds: LabeledDataset, manifest: SplitManifest, split: str, domains: Iterable[int]) -> np.ndarray:
    idx = manifest.indices(split)
    return idx[np.isin(ds.d[idx], list(domains))]


def scenario_views(ds: LabeledDataset, manifest: SplitManifest) -> dict[str, ScenarioView]:
    """Row-index views for S1..S4 over one shared manifest (no re-splitting)."""
    out = {}
    for name, (src, tgt) in SCENARIOS.items():
        out[name] = ScenarioView(
            name, src, tgt,
            domain_rows(ds, manifest, "train", [src]),
            domain_rows(ds, manifest, "val", [src]),
            domain_rows(ds, manifest, "test", [tgt]),
        )
    return out
