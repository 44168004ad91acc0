"""Confusion matrices, per-class and macro precision/recall/F1, accuracy,
and the rendered evaluation artifacts (JSON report, text summary, charts).

Per-class metrics are one-vs-rest on the confusion matrix (rows = actual,
columns = predicted): TP = counts[k][k], FP = column sum minus TP,
FN = row sum minus TP. Any 0/0 ratio is defined as 0 and flagged in the
report rather than propagating NaN into the macro averages. Macro averages
are unweighted means over classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .catalog import CLASS_LABELS
from .errors import DataError
from .util import canonical_json, read_json, write_json_atomic

#: Reference results of the full-scale CICDDoS2019 run this pipeline
#: reproduces, with the acceptance windows used by the comparison harness.
REFERENCE_RESULTS = {
    "binary_accuracy": 0.9999,
    "binary_accuracy_tolerance": 0.005,
    "multiclass_accuracy": 0.8706,
    "multiclass_accuracy_tolerance": 0.03,
    "macro_precision": 0.87,
    "macro_recall": 0.86,
    "macro_f1": 0.86,
    "macro_tolerance": 0.05,
}


@dataclass
class ConfusionMatrix:
    """KxK actual-vs-predicted counts; this pipeline emits K=12 or K=2."""

    counts: np.ndarray  # int64 (K, K), rows = actual, cols = predicted
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.class_names)
        if self.counts.shape != (k, k):
            raise DataError(f"counts must be ({k}, {k}), got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise DataError("confusion counts must be non-negative")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(
    actual: Sequence[int],
    predicted: Sequence[int],
    class_names: Sequence[str],
) -> ConfusionMatrix:
    """Tally actual/predicted id pairs into a matrix over the given classes."""
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.shape != predicted.shape or actual.ndim != 1:
        raise DataError("actual and predicted must be equal-length 1-D sequences")
    if actual.size == 0:
        raise DataError("cannot build a confusion matrix from zero samples")
    k = len(class_names)
    if actual.min() < 0 or actual.max() >= k or predicted.min() < 0 or predicted.max() >= k:
        raise DataError(f"labels outside 0..{k - 1}")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (actual, predicted), 1)
    return ConfusionMatrix(counts=counts, class_names=tuple(class_names))


def one_vs_rest_counts(matrix: ConfusionMatrix, k: int) -> tuple[int, int, int]:
    """(TP, FP, FN) for class k."""
    counts = matrix.counts
    tp = int(counts[k, k])
    fp = int(counts[:, k].sum() - tp)
    fn = int(counts[k, :].sum() - tp)
    return tp, fp, fn


def precision_recall_f1(matrix: ConfusionMatrix, k: int) -> tuple[float, float, float]:
    """One-vs-rest precision, recall, F1 for class k (0/0 cases -> 0)."""
    tp, fp, fn = one_vs_rest_counts(matrix, k)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def accuracy(matrix: ConfusionMatrix) -> float:
    """Correct predictions over all samples (trace / total)."""
    total = matrix.total
    if total == 0:
        raise DataError("empty confusion matrix")
    return float(np.trace(matrix.counts)) / total


def collapse(
    matrix: ConfusionMatrix,
    group_of_class: Sequence[int],
    group_names: Sequence[str],
) -> ConfusionMatrix:
    """Merge classes into groups (e.g. 12 classes -> attack/normal)."""
    groups = np.asarray(group_of_class, dtype=np.int64)
    if groups.shape != (matrix.num_classes,):
        raise DataError("group_of_class must assign every class")
    g = len(group_names)
    counts = np.zeros((g, g), dtype=np.int64)
    np.add.at(counts, (groups[:, None], groups[None, :]), matrix.counts)
    return ConfusionMatrix(counts=counts, class_names=tuple(group_names))


def attack_group_ids() -> list[int]:
    """Group assignment of the 12-class taxonomy onto (normal=0, attack=1)."""
    return [1 if label.is_attack else 0 for label in CLASS_LABELS]


@dataclass
class ClassMetrics:
    name: str
    precision: float
    recall: float
    f1: float
    support: int
    zero_division: list[str] = field(default_factory=list)  # flagged 0/0 metrics


@dataclass
class EvalReport:
    """Everything the evaluation stage publishes for one trained model."""

    matrix: ConfusionMatrix
    per_class: list[ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    metadata: dict = field(default_factory=dict)

    @classmethod
    def build(cls, matrix: ConfusionMatrix, **metadata) -> "EvalReport":
        per_class = []
        for k, name in enumerate(matrix.class_names):
            tp, fp, fn = one_vs_rest_counts(matrix, k)
            p, r, f1 = precision_recall_f1(matrix, k)
            flags = []
            if tp + fp == 0:
                flags.append("precision")
            if tp + fn == 0:
                flags.append("recall")
            if p + r == 0:
                flags.append("f1")
            per_class.append(
                ClassMetrics(
                    name=name, precision=p, recall=r, f1=f1,
                    support=int(matrix.counts[k, :].sum()), zero_division=flags,
                )
            )
        meta = {"averaging": "macro (unweighted)"}
        meta.update(metadata)
        return cls(
            matrix=matrix,
            per_class=per_class,
            macro_precision=float(np.mean([m.precision for m in per_class])),
            macro_recall=float(np.mean([m.recall for m in per_class])),
            macro_f1=float(np.mean([m.f1 for m in per_class])),
            accuracy=accuracy(matrix),
            metadata=meta,
        )

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "class_names": list(self.matrix.class_names),
            "confusion_matrix": self.matrix.counts.tolist(),
            "per_class": [
                {
                    "name": m.name,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "zero_division": m.zero_division,
                }
                for m in self.per_class
            ],
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "accuracy": self.accuracy,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "EvalReport":
        matrix = ConfusionMatrix(
            counts=np.array(raw["confusion_matrix"], dtype=np.int64),
            class_names=tuple(raw["class_names"]),
        )
        report = cls.build(matrix)
        report.metadata = dict(raw.get("metadata", {}))
        return report

    def save(self, path: Path | str) -> None:
        write_json_atomic(path, self.to_dict())

    @classmethod
    def load(cls, path: Path | str) -> "EvalReport":
        return cls.from_dict(read_json(path))


def macro_row(report: EvalReport) -> str:
    """Macro precision/recall/F1 as the two-decimal comparison row."""
    return (
        f"{report.macro_precision:.2f} {report.macro_recall:.2f} {report.macro_f1:.2f}"
    )


def summary_text(report: EvalReport) -> str:
    """Plain-text summary: comparison-style macro row plus per-class table."""
    lines = []
    lines.append("Evaluation summary")
    lines.append("==================")
    for key in sorted(report.metadata):
        value = report.metadata[key]
        if isinstance(value, dict):
            value = canonical_json(value)
        lines.append(f"{key}: {value}")
    lines.append("")
    lines.append(f"Accuracy: {report.accuracy:.4f}")
    lines.append("")
    lines.append("Method    Precision  Recall  F1-Measure")
    p, r, f1 = macro_row(report).split()
    lines.append(f"This run  {p}       {r}    {f1}")
    lines.append("")
    lines.append(f"{'Class':<12} {'Precision':>9} {'Recall':>9} {'F1':>9} {'Support':>9}")
    for m in report.per_class:
        flag = " *" if m.zero_division else ""
        lines.append(
            f"{m.name:<12} {m.precision:>9.4f} {m.recall:>9.4f} "
            f"{m.f1:>9.4f} {m.support:>9d}{flag}"
        )
    if any(m.zero_division for m in report.per_class):
        lines.append("")
        lines.append("* metric had a 0/0 ratio and was defined as 0")
    return "\n".join(lines) + "\n"


def _new_figure(width: float, height: float):
    # Figure built directly (no pyplot) so no global backend state is touched.
    from matplotlib.figure import Figure

    return Figure(figsize=(width, height), dpi=100)


def render_precision_chart(report: EvalReport, path: Path | str) -> None:
    """Bar chart of per-class precision, one labeled bar per class."""
    fig = _new_figure(max(4.0, 0.7 * len(report.per_class) + 1.5), 4.0)
    ax = fig.add_subplot()
    names = [m.name for m in report.per_class]
    values = [m.precision for m in report.per_class]
    ax.bar(range(len(names)), values, color="#3465a4")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("Precision")
    ax.set_title("Class-wise precision")
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png")


def render_confusion_chart(report: EvalReport, path: Path | str) -> None:
    """Heatmap of the confusion matrix with per-cell counts."""
    matrix = report.matrix
    k = matrix.num_classes
    fig = _new_figure(max(4.0, 0.6 * k + 2.0), max(3.5, 0.6 * k + 1.5))
    ax = fig.add_subplot()
    image = ax.imshow(matrix.counts, cmap="Blues")
    ax.set_xticks(range(k))
    ax.set_xticklabels(matrix.class_names, rotation=45, ha="right")
    ax.set_yticks(range(k))
    ax.set_yticklabels(matrix.class_names)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("Actual")
    ax.set_title("Confusion matrix")
    threshold = matrix.counts.max() / 2 if matrix.total else 0
    for i in range(k):
        for j in range(k):
            ax.text(
                j, i, str(int(matrix.counts[i, j])),
                ha="center", va="center", fontsize=7,
                color="white" if matrix.counts[i, j] > threshold else "black",
            )
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png")


def render_report(report: EvalReport, out_dir: Path | str, stem: str = "eval") -> dict[str, Path]:
    """Write the machine-readable report, text summary, and both charts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out_dir / f"{stem}_report.json",
        "summary": out_dir / f"{stem}_summary.txt",
        "precision_chart": out_dir / f"{stem}_precision_by_class.png",
        "confusion_chart": out_dir / f"{stem}_confusion_matrix.png",
    }
    report.save(paths["report"])
    paths["summary"].write_text(summary_text(report), encoding="utf-8")
    render_precision_chart(report, paths["precision_chart"])
    render_confusion_chart(report, paths["confusion_chart"])
    return paths


def compare_to_reference(report: EvalReport, task: str) -> list[str]:
    """Check a full-dataset evaluation against the reference results.

    Returns a list of deviations (empty when everything falls inside the
    published tolerance windows). Only meaningful for runs over the real
    CICDDoS2019 exports, not desk-scale fixtures.
    """
    ref = REFERENCE_RESULTS
    problems = []
    if task == "binary":
        lo = ref["binary_accuracy"] - ref["binary_accuracy_tolerance"]
        hi = ref["binary_accuracy"] + ref["binary_accuracy_tolerance"]
        if not lo <= report.accuracy <= hi:
            problems.append(
                f"binary accuracy {report.accuracy:.4f} outside [{lo:.4f}, {hi:.4f}]"
            )
    else:
        lo = ref["multiclass_accuracy"] - ref["multiclass_accuracy_tolerance"]
        hi = ref["multiclass_accuracy"] + ref["multiclass_accuracy_tolerance"]
        if not lo <= report.accuracy <= hi:
            problems.append(
                f"multiclass accuracy {report.accuracy:.4f} outside [{lo:.4f}, {hi:.4f}]"
            )
        for name, value in (
            ("precision", report.macro_precision),
            ("recall", report.macro_recall),
            ("f1", report.macro_f1),
        ):
            target = ref[f"macro_{name}"]
            if abs(value - target) > ref["macro_tolerance"]:
                problems.append(
                    f"macro {name} {value:.4f} not within "
                    f"{ref['macro_tolerance']} of {target}"
                )
    return problems
