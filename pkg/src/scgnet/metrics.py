"""Confusion matrices, precision/recall/F1 and report rendering.

Binary reports use Attack as the positive class. Multiclass reports carry
both macro and support-weighted averages; the weighted one is the headline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EmptyMatrix, LabelOutOfRange, LengthMismatch

REPORT_SCHEMA = "scgnet-eval-report"
REPORT_VERSION = 1
TABLE_COLUMNS = ("Algorithm", "Accuracy", "Precision", "Recall", "F1-Score")

# Comparison rows quoted from the published result tables (binary as fractions,
# multiclass as percentages).
PUBLISHED_BINARY_ROWS = (
    ("LR", "0.548", "0.56", "0.96", "0.721"),
    ("DT", "0.605", "0.79", "0.41", "0.863"),
    ("RF", "0.751", "0.94", "0.60", "0.63"),
    ("SVM", "0.792", "0.86", "0.58", "0.791"),
    ("NB", "0.525", "0.55", "0.90", "0.762"),
    ("KNN", "0.796", "0.801", "0.796", "0.798"),
    ("XGBoost", "0.813", "0.814", "0.813", "0.836"),
    ("AdaBoost", "0.856", "0.826", "0.896", "0.866"),
    ("SCGNet", "0.996", "0.991", "0.993", "0.992"),
)
PUBLISHED_MULTICLASS_ROWS = (
    ("LR", "80.20", "81.44", "80.20", "76.22"),
    ("DT", "76.80", "75.70", "76.80", "76.10"),
    ("RF", "78.93", "78.28", "78.93", "75.18"),
    ("MNB", "82.60", "81.74", "82.60", "81.56"),
    ("KNN", "80.48", "80.69", "80.48", "80.58"),
    ("Linear SVM", "76.80", "79.51", "76.80", "69.60"),
    ("RBF SVM", "78.36", "80.39", "78.36", "72.78"),
    ("XGBoost", "76.94", "76.94", "76.94", "70.85"),
    ("SCGNet", "99.50", "89.90", "92.30", "91.20"),
)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # counts[true][pred]
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(preds, labels, n_classes: int, class_names=None) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if preds.shape != labels.shape:
        raise LengthMismatch(f"{len(preds)} predictions vs {len(labels)} labels")
    for name, arr in (("prediction", preds), ("label", labels)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise LabelOutOfRange(f"{name} outside [0, {n_classes})")
    counts = np.bincount(labels * n_classes + preds, minlength=n_classes * n_classes)
    names = tuple(class_names) if class_names else tuple(str(i) for i in range(n_classes))
    return ConfusionMatrix(counts.reshape(n_classes, n_classes).astype(np.int64), names)


@dataclass
class Averages:
    precision: float
    recall: float
    f1: float


@dataclass
class MetricSet:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    undefined: dict[str, list[int]]
    macro: Averages
    weighted: Averages

    def averaged(self, averaging: str):
        if averaging == "macro":
            return self.macro
        if averaging == "weighted":
            return self.weighted
        if averaging == "per-class":
            return Averages(self.precision, self.recall, self.f1)
        raise ValueError(f"unknown averaging {averaging!r}")


def _safe_div(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    zero = den == 0
    out = np.divide(num, den, out=np.zeros(num.shape, dtype=np.float64), where=~zero)
    return out, zero


def scores(cm: ConfusionMatrix) -> MetricSet:
    """Accuracy plus per-class, macro and support-weighted precision/recall/F1.

    A zero denominator yields 0 and the class index is listed in ``undefined``.
    """
    c = cm.counts.astype(np.float64)
    total = c.sum()
    if total == 0:
        raise EmptyMatrix("confusion matrix has no scored examples")
    tp = np.diag(c)
    support = c.sum(axis=1)
    precision, p_zero = _safe_div(tp, c.sum(axis=0))
    recall, r_zero = _safe_div(tp, support)
    f1, f_zero = _safe_div(2 * precision * recall, precision + recall)
    weights = support / total
    return MetricSet(
        accuracy=float(tp.sum() / total),
        precision=precision,
        recall=recall,
        f1=f1,
        support=cm.counts.sum(axis=1),
        undefined={
            "precision": np.flatnonzero(p_zero).tolist(),
            "recall": np.flatnonzero(r_zero).tolist(),
            "f1": np.flatnonzero(f_zero).tolist(),
        },
        macro=Averages(float(precision.mean()), float(recall.mean()), float(f1.mean())),
        weighted=Averages(float(weights @ precision), float(weights @ recall), float(weights @ f1)),
    )


@dataclass
class EvalReport:
    task: str
    algorithm: str
    cm: ConfusionMatrix
    metrics: MetricSet = field(init=False)
    manifest: str = ""
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.metrics = scores(self.cm)

    def headline(self) -> tuple[float, float, float, float]:
        """(accuracy, precision, recall, F1): Attack-class for binary, weighted for multiclass."""
        m = self.metrics
        if self.task == "binary":
            pos = 1
            return m.accuracy, float(m.precision[pos]), float(m.recall[pos]), float(m.f1[pos])
        w = m.weighted
        return m.accuracy, w.precision, w.recall, w.f1

    def to_dict(self) -> dict:
        m = self.metrics
        acc, p, r, f1 = self.headline()
        return {
            "schema": REPORT_SCHEMA,
            "version": REPORT_VERSION,
            "task": self.task,
            "algorithm": self.algorithm,
            "class_names": list(self.cm.class_names),
            "confusion": self.cm.counts.tolist(),
            "accuracy": m.accuracy,
            "per_class": {
                name: {
                    "precision": float(m.precision[i]),
                    "recall": float(m.recall[i]),
                    "f1": float(m.f1[i]),
                    "support": int(m.support[i]),
                }
                for i, name in enumerate(self.cm.class_names)
            },
            "macro": vars(m.macro).copy(),
            "weighted": vars(m.weighted).copy(),
            "undefined": m.undefined,
            "headline": {
                "averaging": "positive=Attack" if self.task == "binary" else "weighted",
                "accuracy": acc, "precision": p, "recall": r, "f1": f1,
            },
            "manifest": self.manifest,
            "notes": self.notes,
        }


def report_from_dict(doc: dict) -> EvalReport:
    if doc.get("schema") != REPORT_SCHEMA:
        raise DataError(f"not an evaluation report (schema={doc.get('schema')!r})")
    if doc.get("version") != REPORT_VERSION:
        raise DataError(f"report version {doc.get('version')}, expected {REPORT_VERSION}")
    cm = ConfusionMatrix(np.array(doc["confusion"], dtype=np.int64), tuple(doc["class_names"]))
    return EvalReport(doc["task"], doc["algorithm"], cm, doc.get("manifest", ""), doc.get("notes", {}))


def render_machine(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def parse_machine(text: str) -> EvalReport:
    return report_from_dict(json.loads(text))


def _format_row(report: EvalReport) -> tuple[str, ...]:
    values = report.headline()
    if report.task == "binary":
        cells = [f"{v:.4f}" for v in values]
    else:
        cells = [f"{100 * v:.2f}" for v in values]
    return (report.algorithm, *cells)


def render_table(reports, comparisons: bool = False, task: str | None = None) -> str:
    """Aligned text table in the column order of the published result tables."""
    reports = list(reports)
    task = task or (reports[0].task if reports else "binary")
    rows = [_format_row(r) for r in reports]
    quoted = []
    if comparisons:
        quoted = list(PUBLISHED_BINARY_ROWS if task == "binary" else PUBLISHED_MULTICLASS_ROWS)
    widths = [max(len(r[i]) for r in [TABLE_COLUMNS, *rows, *quoted]) for i in range(len(TABLE_COLUMNS))]

    def line(cells):
        return "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))).rstrip()

    scale = "fractions" if task == "binary" else "percent"
    out = [f"# {task} classification ({scale})", line(TABLE_COLUMNS), line(["-" * w for w in widths])]
    out += [line(r) for r in rows]
    if quoted:
        out.append(f"# published comparison rows ({task}), quoted verbatim")
        out += [line(r) for r in quoted]
    return "\n".join(out) + "\n"


def render_report(report, comparisons: bool = False, fmt: str = "machine", path=None) -> str:
    if fmt == "machine":
        if isinstance(report, (list, tuple)):
            raise ValueError("machine format renders a single report")
        text = render_machine(report)
    elif fmt == "table":
        reports = report if isinstance(report, (list, tuple)) else [report]
        text = render_table(reports, comparisons)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def evaluate_predictions(preds, labels, task: str, algorithm: str, class_names) -> EvalReport:
    cm = confusion(preds, labels, len(class_names), class_names)
    return EvalReport(task, algorithm, cm)
