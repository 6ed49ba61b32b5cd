"""Deterministic report files: metrics JSON/CSV and hand-written SVG figures.

Every number written to disk goes through a fixed-precision formatter, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .diagnostic import ShiftDiagnostic
from .metrics import LABELS, MetricsReport

SCENARIO_ORDER = ("S1", "S2", "S3", "S4")
PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


def _f(v: float, nd: int = 2) -> str:
    s = f"{v:.{nd}f}"
    return "0" + s[2:] if s.startswith("-0") and float(s) == 0 else s  # no "-0.00"


def _svg(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def _text(x, y, s, anchor="middle", size=12, weight="normal"):
    return (f'<text x="{_f(x, 1)}" y="{_f(y, 1)}" text-anchor="{anchor}" font-size="{size}" '
            f'font-weight="{weight}">{escape(str(s))}</text>')


def confusion_svg(report: MetricsReport) -> str:
    """Heatmap of row-normalised percentages; empty rows are drawn grey and marked N/A."""
    cell, left, top = 80, 90, 60
    pct = report.matrix.percentages()
    body = [_text(left + 1.5 * cell, 24, f"{report.model} {report.scenario}: accuracy {_f(100 * report.accuracy, 1)}%",
                  size=14, weight="bold"),
            _text(left + 1.5 * cell, top - 10, "predicted"),
            _text(20, top + 1.5 * cell, "true", anchor="middle")]
    for j, lab in enumerate(LABELS):
        body.append(_text(left + (j + 0.5) * cell, top + 3 * cell + 18, lab))
    for i, row in enumerate(pct):
        body.append(_text(left - 8, top + (i + 0.5) * cell + 4, LABELS[i], anchor="end"))
        for j, p in enumerate(row):
            x, y = left + j * cell, top + i * cell
            if p is None:
                fill, label = "#dddddd", "N/A"
            else:
                shade = int(round(255 - 2.0 * p))
                fill, label = f"rgb({shade},{shade},255)", f"{_f(p, 1)}%"
            colour = "white" if p is not None and p > 60 else "black"
            body.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="#333"/>')
            body.append(f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 4:.1f}" text-anchor="middle" '
                        f'fill="{colour}">{label}</text>')
    return _svg(left + 3 * cell + 20, top + 3 * cell + 30, body)


def accuracy_bars_svg(reports: Sequence[MetricsReport]) -> str:
    """Grouped bars: one group per scenario, one bar per model."""
    models = sorted({r.model for r in reports})
    acc = {(r.model, r.scenario): r.accuracy for r in reports}
    scen = [s for s in SCENARIO_ORDER if any(r.scenario == s for r in reports)]
    left, top, h, group = 50, 40, 240, 40 + 28 * len(models)
    width = left + group * len(scen) + 160
    body = [_text(left + group * len(scen) / 2, 22, "Test accuracy by scenario", size=14, weight="bold")]
    for k in range(0, 101, 20):
        y = top + h - h * k / 100
        body.append(f'<line x1="{left}" y1="{_f(y, 1)}" x2="{left + group * len(scen)}" y2="{_f(y, 1)}" stroke="#ddd"/>')
        body.append(_text(left - 6, y + 4, f"{k}%", anchor="end", size=10))
    for g, s in enumerate(scen):
        x0 = left + g * group + 20
        for m, name in enumerate(models):
            a = acc.get((name, s))
            if a is None:
                continue
            bh = h * a
            x = x0 + 28 * m
            body.append(f'<rect x="{x}" y="{_f(top + h - bh, 1)}" width="24" height="{_f(bh, 1)}" '
                        f'fill="{PALETTE[m % len(PALETTE)]}"/>')
            body.append(_text(x + 12, top + h - bh - 4, _f(100 * a, 1), size=9))
        body.append(_text(x0 + 14 * len(models), top + h + 18, s))
    for m, name in enumerate(models):
        y = top + 18 * m
        lx = left + group * len(scen) + 14
        body.append(f'<rect x="{lx}" y="{y}" width="12" height="12" fill="{PALETTE[m % len(PALETTE)]}"/>')
        body.append(_text(lx + 18, y + 10, name, anchor="start"))
    return _svg(width, top + h + 40, body)


def shift_scatter_svg(diag: ShiftDiagnostic) -> str:
    """Scatter of the 2-D PCA embedding; colour = system, marker = class."""
    size, pad = 420, 40
    c = diag.coords
    lo, hi = c.min(axis=0), c.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    xy = pad + (c - lo) / span * (size - 2 * pad)
    body = [_text(size / 2, 22, f"PCA of features by system (domain silhouette {_f(diag.silhouette, 3)})",
                  size=13, weight="bold")]
    for (x, y), dom, lab in zip(xy, diag.domain, diag.label):
        colour = PALETTE[int(dom) % len(PALETTE)]
        yy = size - y
        if int(lab) == 0:
            body.append(f'<circle cx="{_f(x, 1)}" cy="{_f(yy, 1)}" r="2.5" fill="{colour}" fill-opacity="0.6"/>')
        elif int(lab) == 1:
            body.append(f'<rect x="{_f(x - 2.5, 1)}" y="{_f(yy - 2.5, 1)}" width="5" height="5" fill="{colour}" '
                        f'fill-opacity="0.6"/>')
        else:
            body.append(f'<path d="M{_f(x, 1)},{_f(yy - 3, 1)} L{_f(x + 3, 1)},{_f(yy + 2.5, 1)} '
                        f'L{_f(x - 3, 1)},{_f(yy + 2.5, 1)} Z" fill="{colour}" fill-opacity="0.6"/>')
    for k, dom in enumerate(np.unique(diag.domain)):
        body.append(f'<rect x="{pad}" y="{size + 4 + 16 * k}" width="10" height="10" fill="{PALETTE[int(dom)]}"/>')
        body.append(_text(pad + 16, size + 13 + 16 * k, f"system {int(dom) + 1}", anchor="start"))
    body.append(_text(size - pad, size + 13, "circle rlx, square eav, triangle sbd", anchor="end", size=10))
    return _svg(size, size + 40, body)


CSV_FIELDS = ("model", "scenario", "accuracy", *[f"acc_{lab}" for lab in LABELS], "n_test", "normalization",
              "checkpoint_hash", "manifest_hash")


def metrics_csv(reports: Sequence[MetricsReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        per = [("N/A" if r.per_class[lab] is None else _f(r.per_class[lab], 6)) for lab in LABELS]
        w.writerow([r.model, r.scenario, _f(r.accuracy, 6), *per, r.n_test, r.normalization,
                    r.checkpoint_hash, r.manifest_hash])
    return buf.getvalue()


def emit_report(reports: Sequence[MetricsReport], out_dir: str | Path,
                diagnostic: ShiftDiagnostic | None = None, meta: dict | None = None) -> list[Path]:
    """Write metrics.json, metrics.csv, one confusion SVG per scenario and the summary figures.

    When several models share a scenario, confusion files are named
    ``confusion_<scenario>_<model>.svg``; otherwise ``confusion_<scenario>.svg``.
    """
    if not reports:
        raise ValueError("emit_report needs at least one report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        path = out / name
        path.write_text(text)
        written.append(path)

    doc = {"meta": meta or {}, "reports": [r.to_dict() for r in reports]}
    if diagnostic is not None:
        doc["shift_diagnostic"] = diagnostic.to_dict()
    put("metrics.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    put("metrics.csv", metrics_csv(reports))
    per_scenario: dict[str, int] = {}
    for r in reports:
        per_scenario[r.scenario] = per_scenario.get(r.scenario, 0) + 1
    for r in reports:
        name = f"confusion_{r.scenario}.svg" if per_scenario[r.scenario] == 1 else f"confusion_{r.scenario}_{r.model}.svg"
        put(name, confusion_svg(r))
    put("accuracy_bars.svg", accuracy_bars_svg(reports))
    if diagnostic is not None:
        put("shift_scatter.svg", shift_scatter_svg(diagnostic))
    return written


def load_reports(path: str | Path) -> list[MetricsReport]:
    doc = json.loads(Path(path).read_text())
    return [MetricsReport.from_dict(d) for d in doc["reports"]]
