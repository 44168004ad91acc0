"""Confusion-matrix metrics and the rendered report artifacts.

Builds a 12-class confusion matrix from simulated predictions, derives
per-class and macro precision/recall/F1 plus accuracy, collapses it to the
binary attack/normal view, and renders the summary, bar chart, and heatmap.

Run: python demos/05_metrics_and_reports.py  (writes under demos/output/)
"""

from pathlib import Path

import numpy as np

from flowpix.catalog import CLASS_LABELS
from flowpix.metrics import (
    EvalReport,
    accuracy,
    attack_group_ids,
    collapse,
    confusion,
    macro_row,
    render_report,
    summary_text,
)

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

rng = np.random.default_rng(5)
actual = rng.integers(0, 12, size=2000)
# ~85% correct, plus a systematic confusion: UDPLag (C2) -> NetBIOS (C6).
predicted = np.where(rng.random(2000) < 0.85, actual, rng.integers(0, 12, 2000))
predicted = np.where((actual == 2) & (rng.random(2000) < 0.6), 6, predicted)

matrix = confusion(actual, predicted, [f"C{i}" for i in range(12)])
report = EvalReport.build(
    matrix,
    class_display_names={f"C{l.id}": l.name for l in CLASS_LABELS},
)
print(summary_text(report))
print(f"macro row: {macro_row(report)}")

binary = collapse(matrix, attack_group_ids(), ("Normal", "Attack"))
print(f"\n12-class accuracy: {accuracy(matrix):.4f}")
print(f"binary-view accuracy after collapsing C0-C10 to 'Attack': "
      f"{accuracy(binary):.4f}")
print("(misclassifying one attack type as another still detects an attack)")

paths = render_report(report, out_dir, stem="demo")
print("\nrendered artifacts:")
for kind, path in paths.items():
    print(f"  {kind:<16} {path}")
