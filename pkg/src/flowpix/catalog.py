"""Feature schema of CICFlowMeter-style flow CSVs and the class taxonomy.

The catalog declares, in canonical order, the 60 flow features the pipeline
keeps, plus three drop lists: endpoint-identity columns (useless for
generalization), columns that are constant across the dataset, and columns
that duplicate another feature's values under a different name. Header
matching is whitespace-trimmed and case-insensitive because CSV exports of
the same dataset differ in leading spaces and capitalization.

Both the catalog and the label alias table are plain JSON files so they can
be edited without touching code; defaults ship with the package under
``flowpix/data/``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import ConfigError, SchemaError, UnknownLabelError
from .util import read_json

# Drop reasons as they appear in ColumnPlan and ingest reports.
DROP_IDENTITY = "identity"
DROP_CONSTANT = "constant"
DROP_DUPLICATE = "duplicate"
DROP_UNKNOWN = "unknown"


@dataclass(frozen=True)
class ClassLabel:
    """One traffic class: 11 attack types plus normal traffic."""

    id: int
    name: str
    is_attack: bool


#: Canonical 12-class taxonomy. Ids C0..C10 are attacks, C11 is normal traffic.
CLASS_LABELS: tuple[ClassLabel, ...] = tuple(
    ClassLabel(i, name, i != 11)
    for i, name in enumerate(
        [
            "Syn",
            "TFTP",
            "UDPLag",
            "DNS",
            "LDAP",
            "MSSQL",
            "NetBIOS",
            "NTP",
            "SNMP",
            "SSDP",
            "UDP",
            "Normal",
        ]
    )
)

NUM_CLASSES = len(CLASS_LABELS)

_BY_NAME = {label.name.casefold(): label for label in CLASS_LABELS}


def class_by_id(class_id: int) -> ClassLabel:
    if not 0 <= class_id < NUM_CLASSES:
        raise ConfigError(f"class id out of range: {class_id}")
    return CLASS_LABELS[class_id]


def _norm(name: str) -> str:
    """Header/label normalization used for all matching."""
    return name.strip().casefold()


@dataclass(frozen=True)
class FeatureSpec:
    """Identity of one feature column.

    ``column_index`` is the position in the canonical retained order (0..59
    for the default catalog); None for drop-listed features.
    """

    name: str
    retained: bool
    column_index: Optional[int] = None


@dataclass(frozen=True)
class FeatureCatalog:
    """Declares retained features (in canonical order) and the drop lists."""

    features: tuple[FeatureSpec, ...]
    drop_identity: frozenset[str]
    drop_constant: frozenset[str]
    drop_duplicate: frozenset[str]
    label_column: str = "Label"
    version: int = 1

    def __post_init__(self) -> None:
        retained = [f for f in self.features if f.retained]
        indices = sorted(f.column_index for f in retained)
        if indices != list(range(len(retained))):
            raise ConfigError("retained features must have contiguous column_index 0..n-1")
        norm_sets = [
            {_norm(n) for n in s}
            for s in (self.drop_identity, self.drop_constant, self.drop_duplicate)
        ]
        for i in range(len(norm_sets)):
            for j in range(i + 1, len(norm_sets)):
                overlap = norm_sets[i] & norm_sets[j]
                if overlap:
                    raise ConfigError(f"drop lists overlap: {sorted(overlap)}")

    @property
    def retained_names(self) -> tuple[str, ...]:
        return tuple(
            f.name for f in sorted(
                (f for f in self.features if f.retained), key=lambda f: f.column_index
            )
        )

    @property
    def retained_count(self) -> int:
        return sum(1 for f in self.features if f.retained)

    @classmethod
    def from_dict(cls, raw: Mapping) -> "FeatureCatalog":
        try:
            retained = list(raw["retained"])
            specs = [
                FeatureSpec(name=str(n), retained=True, column_index=i)
                for i, n in enumerate(retained)
            ]
            drop_sets = {}
            for key in ("drop_identity", "drop_constant", "drop_duplicate"):
                names = [str(n) for n in raw[key]]
                drop_sets[key] = frozenset(names)
                specs.extend(FeatureSpec(name=n, retained=False) for n in names)
            return cls(
                features=tuple(specs),
                drop_identity=drop_sets["drop_identity"],
                drop_constant=drop_sets["drop_constant"],
                drop_duplicate=drop_sets["drop_duplicate"],
                label_column=str(raw.get("label_column", "Label")),
                version=int(raw.get("version", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid catalog config: {exc}") from exc

    @classmethod
    def load(cls, path: Path | str) -> "FeatureCatalog":
        return cls.from_dict(read_json(path))

    @classmethod
    def default(cls) -> "FeatureCatalog":
        text = resources.files("flowpix").joinpath("data/catalog.json").read_text("utf-8")
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ColumnDecision:
    """What to do with one header column."""

    name: str
    kind: str  # "retain" | "drop" | "label"
    canonical_index: Optional[int] = None  # catalog-wide index, retain only
    slot: Optional[int] = None  # compacted 0..n-1 value slot, retain only
    drop_reason: Optional[str] = None  # identity/constant/duplicate/unknown


@dataclass(frozen=True)
class ColumnPlan:
    """Resolved per-column actions for one concrete CSV header.

    ``slot_positions[s]`` is the header position holding the s-th retained
    value; slots follow the catalog's canonical feature order regardless of
    how the header permutes its columns.
    """

    columns: tuple[ColumnDecision, ...]
    label_index: int
    feature_names: tuple[str, ...]  # plan's retained features, slot order
    slot_positions: tuple[int, ...]
    normalized_header: tuple[str, ...]
    retained_expected: int
    warnings: tuple[str, ...] = ()

    @property
    def retained_count(self) -> int:
        return len(self.feature_names)

    @property
    def dropped_count(self) -> int:
        return sum(1 for c in self.columns if c.kind == "drop")

    def dropped_by_reason(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.columns:
            if c.kind == "drop":
                out[c.drop_reason] = out.get(c.drop_reason, 0) + 1
        return out


def resolve_columns(header: Sequence[str], catalog: FeatureCatalog) -> ColumnPlan:
    """Map a concrete CSV header onto the catalog.

    Every retained catalog feature found in the header gets its canonical
    index; drop-listed names are dropped with their list's reason; names the
    catalog does not know are dropped and recorded in the plan warnings. A
    repeated retained name keeps its first occurrence and drops the rest as
    duplicates (the raw dataset header repeats one feature verbatim).

    Raises SchemaError when the header has no label column.
    """
    retained_index = { _norm(f.name): f.column_index for f in catalog.features if f.retained }
    drop_reason = {}
    for name in catalog.drop_identity:
        drop_reason[_norm(name)] = DROP_IDENTITY
    for name in catalog.drop_constant:
        drop_reason[_norm(name)] = DROP_CONSTANT
    for name in catalog.drop_duplicate:
        drop_reason[_norm(name)] = DROP_DUPLICATE
    label_norm = _norm(catalog.label_column)

    decisions: list[ColumnDecision] = []
    seen_retained: dict[str, int] = {}  # normalized name -> header position
    unknown: list[str] = []
    label_index: Optional[int] = None

    for pos, raw_name in enumerate(header):
        name = _norm(raw_name)
        if name == label_norm and label_index is None:
            label_index = pos
            decisions.append(ColumnDecision(raw_name, "label"))
        elif name in retained_index and name not in seen_retained:
            seen_retained[name] = pos
            decisions.append(
                ColumnDecision(raw_name, "retain", canonical_index=retained_index[name])
            )
        elif name in seen_retained or name == label_norm:
            decisions.append(
                ColumnDecision(raw_name, "drop", drop_reason=DROP_DUPLICATE)
            )
        elif name in drop_reason:
            decisions.append(ColumnDecision(raw_name, "drop", drop_reason=drop_reason[name]))
        else:
            unknown.append(raw_name.strip())
            decisions.append(ColumnDecision(raw_name, "drop", drop_reason=DROP_UNKNOWN))

    if label_index is None:
        raise SchemaError(
            f"header has no label column (expected {catalog.label_column!r})"
        )

    # Compact canonical indices into contiguous slots, canonical order first.
    retained_positions = sorted(
        (d.canonical_index, pos)
        for pos, d in enumerate(decisions)
        if d.kind == "retain"
    )
    slot_of_pos = {pos: slot for slot, (_, pos) in enumerate(retained_positions)}
    decisions = [
        ColumnDecision(
            d.name, d.kind, canonical_index=d.canonical_index,
            slot=slot_of_pos.get(pos), drop_reason=d.drop_reason,
        )
        if d.kind == "retain"
        else d
        for pos, d in enumerate(decisions)
    ]
    slot_positions = tuple(pos for _, pos in retained_positions)
    feature_names = tuple(header[pos].strip() for pos in slot_positions)

    warnings = []
    expected = catalog.retained_count
    if len(slot_positions) < expected:
        warnings.append(
            f"retained {len(slot_positions)} of {expected} catalog features"
        )
    if unknown:
        warnings.append(f"dropped {len(unknown)} unknown column(s): {', '.join(unknown)}")

    return ColumnPlan(
        columns=tuple(decisions),
        label_index=label_index,
        feature_names=feature_names,
        slot_positions=slot_positions,
        normalized_header=tuple(_norm(n) for n in header),
        retained_expected=expected,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class LabelMapper:
    """Maps raw CSV label text onto the 12-class taxonomy via an alias table."""

    aliases: Mapping[str, ClassLabel]  # normalized raw text -> class
    version: int = 1

    def try_map(self, raw: str) -> Optional[ClassLabel]:
        return self.aliases.get(_norm(raw))

    def map(self, raw: str) -> ClassLabel:
        label = self.try_map(raw)
        if label is None:
            raise UnknownLabelError(f"unknown label: {raw!r}")
        return label

    @classmethod
    def from_dict(cls, raw: Mapping) -> "LabelMapper":
        try:
            aliases: dict[str, ClassLabel] = {}
            for alias, class_name in raw["aliases"].items():
                target = _BY_NAME.get(_norm(str(class_name)))
                if target is None:
                    raise ConfigError(f"alias {alias!r} maps to unknown class {class_name!r}")
                aliases[_norm(str(alias))] = target
            # Canonical class names always resolve to themselves.
            for label in CLASS_LABELS:
                aliases.setdefault(_norm(label.name), label)
            return cls(aliases=aliases, version=int(raw.get("version", 1)))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"invalid label alias config: {exc}") from exc

    @classmethod
    def load(cls, path: Path | str) -> "LabelMapper":
        return cls.from_dict(read_json(path))

    @classmethod
    def default(cls) -> "LabelMapper":
        text = resources.files("flowpix").joinpath("data/labels.json").read_text("utf-8")
        return cls.from_dict(json.loads(text))


def map_label(raw: str, mapper: Optional[LabelMapper] = None) -> ClassLabel:
    """Resolve one raw label string (case-insensitive) to its class."""
    return (mapper or LabelMapper.default()).map(raw)


def full_dataset_header(catalog: Optional[FeatureCatalog] = None) -> list[str]:
    """The raw 86-column header this catalog accounts for in full.

    Retained and drop-listed names in dataset column order, with the one
    verbatim repeated feature, plus the trailing label column. Useful for
    fixtures and for documenting the cleaning arithmetic (60 retained + 25
    dropped + 1 label).
    """
    return [
        "Flow ID", "Source IP", "Source Port", "Destination IP", "Destination Port",
        "Protocol", "Timestamp", "Flow Duration", "Total Fwd Packets",
        "Total Backward Packets", "Total Length of Fwd Packets",
        "Total Length of Bwd Packets", "Fwd Packet Length Max",
        "Fwd Packet Length Min", "Fwd Packet Length Mean", "Fwd Packet Length Std",
        "Bwd Packet Length Max", "Bwd Packet Length Min", "Bwd Packet Length Mean",
        "Bwd Packet Length Std", "Flow Bytes/s", "Flow Packets/s", "Flow IAT Mean",
        "Flow IAT Std", "Flow IAT Max", "Flow IAT Min", "Fwd IAT Total",
        "Fwd IAT Mean", "Fwd IAT Std", "Fwd IAT Max", "Fwd IAT Min", "Bwd IAT Total",
        "Bwd IAT Mean", "Bwd IAT Std", "Bwd IAT Max", "Bwd IAT Min", "Fwd PSH Flags",
        "Bwd PSH Flags", "Fwd URG Flags", "Bwd URG Flags", "Fwd Header Length",
        "Bwd Header Length", "Fwd Packets/s", "Bwd Packets/s", "Min Packet Length",
        "Max Packet Length", "Packet Length Mean", "Packet Length Std",
        "Packet Length Variance", "FIN Flag Count", "SYN Flag Count",
        "RST Flag Count", "PSH Flag Count", "ACK Flag Count", "URG Flag Count",
        "CWE Flag Count", "ECE Flag Count", "Down/Up Ratio", "Average Packet Size",
        "Avg Fwd Segment Size", "Avg Bwd Segment Size", "Fwd Header Length",
        "Fwd Avg Bytes/Bulk", "Fwd Avg Packets/Bulk", "Fwd Avg Bulk Rate",
        "Bwd Avg Bytes/Bulk", "Bwd Avg Packets/Bulk", "Bwd Avg Bulk Rate",
        "Subflow Fwd Packets", "Subflow Fwd Bytes", "Subflow Bwd Packets",
        "Subflow Bwd Bytes", "Init_Win_bytes_forward", "Init_Win_bytes_backward",
        "act_data_pkt_fwd", "min_seg_size_forward", "Active Mean", "Active Std",
        "Active Max", "Active Min", "Idle Mean", "Idle Std", "Idle Max", "Idle Min",
        "Inbound", (catalog.label_column if catalog else "Label"),
    ]
