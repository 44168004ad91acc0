"""Synthetic flow-feature CSV generator for desk-scale pipeline testing.

Generates class-labeled rows from simple parametric per-feature
distributions (constant / uniform / normal) with controllable separation,
optionally corrupting an exact fraction of feature cells (empty string,
"NaN", or "Infinity"). A JSON sidecar records the ingest statistics the
generated file must produce, computed from the generator's own bookkeeping
with the same first-bad-cell-wins reason priority the ingest stage uses.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .catalog import FeatureCatalog, LabelMapper
from .errors import ConfigError
from .ingest import IngestStats
from .util import subseed, write_json_atomic

#: Corruption kinds and the rejection reason each one triggers at ingest.
MALFORMED_CELLS = (("", "missing_value"), ("NaN", "non_finite"), ("Infinity", "non_finite"))


@dataclass(frozen=True)
class FeatureModel:
    """Sampling model for one feature column."""

    kind: str  # "constant" | "uniform" | "normal"
    a: float = 0.0  # constant value / uniform low / normal mean
    b: float = 1.0  # uniform high / normal std (ignored for constant)

    def __post_init__(self) -> None:
        # Non-finite parameters would emit cells the ingest stage rejects,
        # silently desynchronizing the ground-truth sidecar.
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ConfigError("distribution parameters must be finite")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, self.a, dtype=np.float64)
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size=n)
        if self.kind == "normal":
            return rng.normal(self.a, self.b, size=n)
        raise ConfigError(f"unknown distribution kind: {self.kind!r}")


@dataclass(frozen=True)
class ClassSpec:
    """How many rows to emit for one class and how their features look.

    ``base`` applies to every feature not overridden in ``features``. The
    label is written verbatim, so unknown-label handling can be exercised by
    using a name outside the alias table.
    """

    label: str
    rows: int
    base: FeatureModel = FeatureModel("uniform", 0.0, 1.0)
    features: Mapping[str, FeatureModel] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.rows < 0:
            raise ConfigError("row count must be >= 0")


@dataclass(frozen=True)
class SynthSpec:
    classes: tuple[ClassSpec, ...]
    feature_names: tuple[str, ...]
    seed: int = 0
    malformed_fraction: float = 0.0
    label_column: str = "Label"
    shuffle: bool = True  # interleave classes like a real capture file

    def __post_init__(self) -> None:
        if not 0 <= self.malformed_fraction < 1:
            raise ConfigError("malformed_fraction must be in [0, 1)")
        if not self.feature_names:
            raise ConfigError("feature_names must not be empty")


def separable_classes(
    labels: Sequence[str],
    rows_per_class: int | Sequence[int],
    spread: float = 0.5,
    gap: float = 100.0,
) -> tuple[ClassSpec, ...]:
    """Classes with widely separated feature means (trivially learnable)."""
    if isinstance(rows_per_class, int):
        rows_per_class = [rows_per_class] * len(labels)
    return tuple(
        ClassSpec(
            label=label,
            rows=rows,
            base=FeatureModel("normal", gap * (i + 1), spread),
        )
        for i, (label, rows) in enumerate(zip(labels, rows_per_class))
    )


def default_feature_names() -> tuple[str, ...]:
    """The full 60-feature canonical schema from the default catalog."""
    return FeatureCatalog.default().retained_names


def generate(
    spec: SynthSpec,
    out_path: Path | str,
    mapper: Optional[LabelMapper] = None,
    catalog: Optional[FeatureCatalog] = None,
) -> tuple[Path, Path]:
    """Write one CSV plus its ground-truth sidecar; returns both paths.

    Deterministic given ``spec.seed`` (byte-identical re-runs). The
    sidecar's expected statistics account for both injected malformed cells
    and labels the alias table cannot map. Feature names must be a subset of
    the catalog's retained features in canonical order, so the generator's
    cell bookkeeping and the ingest scan agree on column priority.
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    mapper = mapper or LabelMapper.default()
    catalog = catalog or FeatureCatalog.default()
    order_of = {name: i for i, name in enumerate(catalog.retained_names)}
    indices = [order_of.get(name) for name in spec.feature_names]
    if None in indices or sorted(indices) != indices:
        raise ConfigError(
            "feature_names must be retained catalog features in canonical order"
        )
    n_features = len(spec.feature_names)

    value_rng = np.random.default_rng(subseed(spec.seed, "synth", "values"))
    rows: list[list[str]] = []
    labels: list[str] = []
    for cls in spec.classes:
        if cls.rows == 0:
            continue
        columns = []
        for name in spec.feature_names:
            model = cls.features.get(name, cls.base)
            columns.append(model.sample(value_rng, cls.rows))
        block = np.column_stack(columns)
        for r in range(cls.rows):
            rows.append([format(v, ".9g") for v in block[r]])
            labels.append(cls.label)

    order = np.arange(len(rows))
    if spec.shuffle and len(rows) > 1:
        shuffle_rng = np.random.default_rng(subseed(spec.seed, "synth", "shuffle"))
        shuffle_rng.shuffle(order)
    rows = [rows[i] for i in order]
    labels = [labels[i] for i in order]

    # Corrupt an exact number of feature cells, sampled uniformly without
    # replacement over all (row, column) positions.
    corrupted: dict[int, list[int]] = {}
    total_cells = len(rows) * n_features
    n_malformed = int(round(spec.malformed_fraction * total_cells))
    if n_malformed:
        mal_rng = np.random.default_rng(subseed(spec.seed, "synth", "malformed"))
        flat = mal_rng.choice(total_cells, size=n_malformed, replace=False)
        kinds = mal_rng.integers(0, len(MALFORMED_CELLS), size=n_malformed)
        for position, kind in zip(flat.tolist(), kinds.tolist()):
            r, c = divmod(position, n_features)
            rows[r][c] = MALFORMED_CELLS[kind][0]
            corrupted.setdefault(r, []).append(c)

    expected = IngestStats()
    for r, label in enumerate(labels):
        expected.rows_read += 1
        bad_cols = sorted(corrupted.get(r, ()))
        if bad_cols:
            # Ingest scans cells in canonical order; first bad cell wins.
            cell = rows[r][bad_cols[0]]
            reason = next(rsn for text, rsn in MALFORMED_CELLS if text == cell)
            expected.reject(reason)
            continue
        mapped = mapper.try_map(label)
        if mapped is None:
            expected.reject("unknown_label")
        else:
            expected.emit(mapped)

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(spec.feature_names) + [spec.label_column])
        for cells, label in zip(rows, labels):
            writer.writerow(cells + [label])

    sidecar_path = out_path.with_suffix(out_path.suffix + ".expected.json")
    write_json_atomic(
        sidecar_path,
        {
            "version": 1,
            "csv": out_path.name,
            "seed": spec.seed,
            "malformed_cells": n_malformed,
            "expected_stats": expected.to_dict(),
        },
    )
    return out_path, sidecar_path
