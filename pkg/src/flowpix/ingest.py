"""Streaming CSV ingestion: apply a ColumnPlan, validate cells, emit records.

Rows are validated whole: a single missing, non-numeric, or non-finite
retained cell rejects the entire row (no imputation), as does a label with
no alias-table entry. Rejection reasons are counted per row using a fixed
priority: retained cells are scanned in canonical feature order and the
first failing cell decides the reason; the label is checked last.

Memory stays bounded: rows are parsed and yielded one at a time, so
multi-gigabyte exports stream through without whole-file loads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .catalog import ClassLabel, ColumnPlan, LabelMapper
from .errors import DataError, SchemaError

#: Counted rejection reasons, in reporting order.
REJECT_REASONS = ("missing_value", "non_numeric", "non_finite", "unknown_label")


@dataclass(frozen=True)
class FlowRecord:
    """One cleaned flow sample: finite feature values in canonical slot order."""

    values: np.ndarray  # float64, shape (plan.retained_count,)
    label: ClassLabel
    source_file: str
    row_number: int  # 1-based data-row index within the source file


@dataclass
class IngestStats:
    """Row accounting for one file (or an aggregate over files)."""

    rows_read: int = 0
    rows_emitted: int = 0
    rejected: dict[str, int] = field(default_factory=dict)
    emitted_by_class: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejected[reason] = self.rejected.get(reason, 0) + 1

    def emit(self, label: ClassLabel) -> None:
        self.rows_emitted += 1
        self.emitted_by_class[label.name] = self.emitted_by_class.get(label.name, 0) + 1

    @property
    def rejected_total(self) -> int:
        return sum(self.rejected.values())

    def is_conserved(self) -> bool:
        return self.rows_read == self.rows_emitted + self.rejected_total

    def merge(self, other: "IngestStats") -> None:
        self.rows_read += other.rows_read
        self.rows_emitted += other.rows_emitted
        for reason, n in other.rejected.items():
            self.rejected[reason] = self.rejected.get(reason, 0) + n
        for name, n in other.emitted_by_class.items():
            self.emitted_by_class[name] = self.emitted_by_class.get(name, 0) + n

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_emitted": self.rows_emitted,
            "rejected_by_reason": {
                r: self.rejected[r] for r in sorted(self.rejected)
            },
            "emitted_by_class": {
                c: self.emitted_by_class[c] for c in sorted(self.emitted_by_class)
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "IngestStats":
        return cls(
            rows_read=int(raw["rows_read"]),
            rows_emitted=int(raw["rows_emitted"]),
            rejected={k: int(v) for k, v in raw.get("rejected_by_reason", {}).items()},
            emitted_by_class={
                k: int(v) for k, v in raw.get("emitted_by_class", {}).items()
            },
        )


def _classify_cell(cell: Optional[str]) -> tuple[Optional[float], Optional[str]]:
    """Parse one retained cell; returns (value, None) or (None, reason)."""
    if cell is None:
        return None, "missing_value"
    text = cell.strip()
    if not text:
        return None, "missing_value"
    try:
        value = float(text)
    except ValueError:
        return None, "non_numeric"
    if not math.isfinite(value):
        return None, "non_finite"
    return value, None


def ingest_file(
    path: Path | str,
    plan: ColumnPlan,
    mapper: LabelMapper,
    stats: Optional[IngestStats] = None,
    file_id: Optional[str] = None,
) -> Iterator[FlowRecord]:
    """Stream cleaned FlowRecords from one CSV file.

    ``stats`` (when given) is filled in as the stream is consumed. Raises
    SchemaError if the file's header disagrees with the plan, DataError if
    the file is empty or unreadable.
    """
    path = Path(path)
    file_id = file_id or str(path)
    if stats is None:
        stats = IngestStats()

    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty (no header row)")
        except csv.Error as exc:
            raise DataError(f"{path}: malformed CSV: {exc}") from exc
        normalized = tuple(name.strip().casefold() for name in header)
        if normalized != plan.normalized_header:
            raise SchemaError(f"{path}: header does not match the resolved column plan")

        def rows():
            try:
                yield from reader
            except csv.Error as exc:
                raise DataError(f"{path}: malformed CSV: {exc}") from exc

        n_slots = len(plan.slot_positions)
        for row_number, row in enumerate(rows(), start=1):
            stats.rows_read += 1
            values = np.empty(n_slots, dtype=np.float64)
            reason: Optional[str] = None
            for slot, pos in enumerate(plan.slot_positions):
                value, reason = _classify_cell(row[pos] if pos < len(row) else None)
                if reason is not None:
                    break
                values[slot] = value
            if reason is None:
                raw_label = row[plan.label_index] if plan.label_index < len(row) else None
                if raw_label is None or not raw_label.strip():
                    reason = "missing_value"
                else:
                    label = mapper.try_map(raw_label)
                    if label is None:
                        reason = "unknown_label"
            if reason is not None:
                stats.reject(reason)
                continue
            stats.emit(label)
            yield FlowRecord(
                values=values, label=label, source_file=file_id, row_number=row_number
            )


def ingest_all(
    path: Path | str,
    plan: ColumnPlan,
    mapper: LabelMapper,
    file_id: Optional[str] = None,
) -> tuple[list[FlowRecord], IngestStats]:
    """Convenience wrapper: materialize the whole stream (tests, small files)."""
    stats = IngestStats()
    records = list(ingest_file(path, plan, mapper, stats=stats, file_id=file_id))
    return records, stats
