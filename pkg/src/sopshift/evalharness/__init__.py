"""Four-scenario evaluation, the PCA shift diagnostic, reports, experiments and the CLI."""

from .diagnostic import ShiftDiagnostic, pca_shift_diagnostic, silhouette, top_components
from .metrics import ConfusionMatrix, MetricsReport, evaluate, manifest_digest, per_class_breakdown
from .report import emit_report

__all__ = [
    "ConfusionMatrix", "MetricsReport", "ShiftDiagnostic", "emit_report", "evaluate", "manifest_digest",
    "pca_shift_diagnostic", "per_class_breakdown", "silhouette", "top_components",
]
