"""Trace -> spectral signature: channel difference, NPSV, segmentation, windowed FFT power."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import container
from .tracesim import EventClass, PolarimetricTrace

SEGMENT = 500
NFFT = 512


@dataclass
class NpsvSeries:
    values: np.ndarray
    system_id: int
    event: EventClass
    seed: int

    def __len__(self) -> int:
        return self.values.size


@dataclass
class SpectralSignature:
    power: np.ndarray  # (T, 512)
    event: EventClass
    system_id: int
    seed: int = 0
    segment_length: int = SEGMENT
    fft_size: int = NFFT

    def __post_init__(self):
        self.power = np.asarray(self.power, dtype=np.float64)
        self.event = EventClass(self.event)
        if self.power.ndim != 2:
            raise ValueError("power must be a 2-D (segments x bins) matrix")

    @property
    def rows(self) -> int:
        return self.power.shape[0]

    @property
    def name(self) -> str:
        return f"sys{self.system_id}_{self.event.label}"


def delta_s(trace: PolarimetricTrace) -> np.ndarray:
    return trace.i1 - trace.i2


def npsv(ds) -> np.ndarray:
    """First difference of the channel difference: ``out[t] = ds[t+1] - ds[t]``."""
    ds = np.asarray(ds, dtype=np.float64)
    if ds.ndim != 1 or ds.size < 2:
        raise ValueError("npsv needs a 1-D series of at least 2 samples")
    return np.diff(ds)


def hamming_window(n: int) -> np.ndarray:
    # numpy's definition is the classic 0.54 - 0.46 cos(2 pi k / (n - 1))
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    return np.hamming(n)


def power_spectra(segments: np.ndarray) -> np.ndarray:
    """Row-wise two-sided 512-bin power of Hamming-windowed, zero-padded 500-sample segments."""
    segments = np.asarray(segments, dtype=np.float64)
    if segments.ndim != 2 or segments.shape[1] != SEGMENT:
        raise ValueError(f"expected segments of shape (T, {SEGMENT}), got {segments.shape}")
    if not np.isfinite(segments).all():
        raise ValueError("segment contains non-finite values")
    spec = np.fft.fft(segments * hamming_window(SEGMENT), n=NFFT, axis=1)
    return spec.real**2 + spec.imag**2


def power_spectrum(segment) -> np.ndarray:
    segment = np.asarray(segment, dtype=np.float64)
    if segment.shape != (SEGMENT,):
        raise ValueError(f"segment must have exactly {SEGMENT} samples, got shape {segment.shape}")
    return power_spectra(segment[None, :])[0]


def segment(series: np.ndarray) -> np.ndarray:
    t = series.size // SEGMENT
    if t < 1:
        raise ValueError(f"series of length {series.size} is shorter than one {SEGMENT}-sample segment")
    return series[: t * SEGMENT].reshape(t, SEGMENT)


def featurize_trace(trace: PolarimetricTrace) -> SpectralSignature:
    series = npsv(delta_s(trace))
    return SpectralSignature(power_spectra(segment(series)), trace.event, trace.system_id, trace.seed)


def save_signature(sig: SpectralSignature, path: str | Path) -> None:
    header = {
        "kind": "features",
        "rows": sig.rows,
        "cols": sig.power.shape[1],
        "event": int(sig.event),
        "system_id": sig.system_id,
        "seed": sig.seed,
    }
    container.write(path, header, {"power": sig.power})


def load_signature(path: str | Path) -> SpectralSignature:
    header, arrays = container.read(path)
    if header.get("kind") != "features":
        raise ValueError(f"{path}: not a feature file")
    return SpectralSignature(arrays["power"], header["event"], header["system_id"], header.get("seed", 0))
