"""PCA projection of both systems' features with a domain silhouette score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def top_components(x: np.ndarray, k: int = 2, max_iter: int = 1000, tol: float = 1e-12,
                   seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Leading ``k`` eigenpairs of the covariance of centred ``x`` by power iteration with deflation.

    Returns ``(components, variances)`` with components as rows. A direction
    whose variance is numerically zero is replaced by the next unused
    coordinate axis, so degenerate inputs still give a usable projection.
    """
    n, f = x.shape
    cov = x.T @ x / max(n - 1, 1)
    scale = float(np.trace(cov)) or 1.0
    rng = np.random.default_rng(seed)
    comps, vals = [], []
    work = cov.copy()
    for _ in range(k):
        v = rng.standard_normal(f)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(max_iter):
            w = work @ v
            norm = np.linalg.norm(w)
            if norm <= 1e-14 * scale:
                lam = 0.0
                break
            w /= norm
            # fix the sign so the result does not depend on the start vector
            w *= np.sign(w[np.argmax(np.abs(w))])
            done = np.linalg.norm(w - v) < tol
            v, lam = w, float(w @ work @ w)
            if done:
                break
        if lam <= 1e-12 * scale:
            used = {int(np.argmax(np.abs(c))) for c in comps}
            axis = next(i for i in range(f) if i not in used)
            v = np.zeros(f)
            v[axis] = 1.0
            lam = float(cov[axis, axis])
        comps.append(v)
        vals.append(lam)
        work = work - lam * np.outer(v, v)
    return np.array(comps), np.array(vals)


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient with Euclidean distance (0 for singleton clusters)."""
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least two clusters")
    sq = (points ** 2).sum(axis=1)
    dist = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * points @ points.T, 0.0))
    masks = [labels == u for u in uniq]
    mean_to = np.stack([dist[:, m].sum(axis=1) for m in masks], axis=1)
    sizes = np.array([m.sum() for m in masks], dtype=float)
    own = np.searchsorted(uniq, labels)
    n_own = sizes[own]
    a = np.where(n_own > 1, mean_to[np.arange(len(labels)), own] / np.maximum(n_own - 1, 1), 0.0)
    other = mean_to / sizes
    other[np.arange(len(labels)), own] = np.inf
    b = other.min(axis=1)
    s = np.where(n_own > 1, (b - a) / np.maximum(np.maximum(a, b), 1e-300), 0.0)
    return float(s.mean())


@dataclass
class ShiftDiagnostic:
    coords: np.ndarray  # (n, 2)
    domain: np.ndarray
    label: np.ndarray
    components: np.ndarray
    variances: np.ndarray
    silhouette: float

    def to_dict(self) -> dict:
        return {"silhouette": self.silhouette, "variances": self.variances.tolist(), "n": int(len(self.domain))}


def pca_shift_diagnostic(features: np.ndarray, domain: np.ndarray, label: np.ndarray,
                         n_per_system: int = 500, seed: int = 0) -> ShiftDiagnostic:
    """Project pooled, standardised features on the top-2 principal directions.

    At most ``n_per_system`` rows per domain are drawn (seeded, without
    replacement). Columns are z-scored with pooled statistics before
    centring so that a few high-power bins do not dominate the projection.
    The score is the silhouette of the domain labels in the 2-D embedding.
    """
    features = np.asarray(features, dtype=np.float64)
    domain, label = np.asarray(domain), np.asarray(label)
    rng = np.random.default_rng(seed)
    pick = []
    for dom in np.unique(domain):
        rows = np.flatnonzero(domain == dom)
        if rows.size < 2:
            raise ValueError("need at least two rows per system")
        pick.append(np.sort(rng.choice(rows, size=min(n_per_system, rows.size), replace=False)))
    if len(pick) < 2:
        raise ValueError("need rows from two systems")
    idx = np.concatenate(pick)
    x = features[idx]
    x = x - x.mean(axis=0)
    std = x.std(axis=0)
    x = x / np.where(std > 1e-12, std, 1.0)
    comps, var = top_components(x, 2, seed=seed)
    coords = x @ comps.T
    return ShiftDiagnostic(coords, domain[idx], label[idx], comps, var, silhouette(coords, domain[idx]))


def class_rankings(signatures) -> dict[int, tuple[tuple[int, ...], tuple[int, ...]]]:
    """Per system, event codes ordered by mean segment energy and by spectral-peak bin.

    The peak is the argmax of the mean spectrum over the non-negative
    frequency bins (0 .. NFFT/2).
    """
    energy: dict[int, dict[int, float]] = {}
    peak: dict[int, dict[int, int]] = {}
    for sig in signatures:
        p = sig.power
        energy.setdefault(sig.system_id, {})[int(sig.event)] = float(p.sum(axis=1).mean())
        half = p[:, : p.shape[1] // 2 + 1].mean(axis=0)
        peak.setdefault(sig.system_id, {})[int(sig.event)] = int(np.argmax(half))
    out = {}
    for sys_id in energy:
        e, k = energy[sys_id], peak[sys_id]
        out[sys_id] = (tuple(sorted(e, key=e.get)), tuple(sorted(k, key=lambda c: (k[c], c))))
    return out


def marginal_shift_fraction(x1: np.ndarray, x2: np.ndarray) -> float:
    """Fraction of bins whose mean differs by at least one pooled within-system standard deviation."""
    x1, x2 = np.asarray(x1, dtype=np.float64), np.asarray(x2, dtype=np.float64)
    n1, n2 = len(x1), len(x2)
    pooled = np.sqrt(((n1 - 1) * x1.var(axis=0, ddof=1) + (n2 - 1) * x2.var(axis=0, ddof=1)) / (n1 + n2 - 2))
    diff = np.abs(x1.mean(axis=0) - x2.mean(axis=0))
    return float(np.mean(diff >= np.maximum(pooled, 1e-300)))
