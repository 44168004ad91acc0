"""Walk through the feature-cleaning rules on a full CICDDoS2019-style header.

Shows how the 85 feature columns collapse to the canonical 60 retained
features via the three drop lists, and how raw label text maps onto the
12-class taxonomy.

Run: python demos/01_feature_cleaning.py
"""

from flowpix.catalog import (
    CLASS_LABELS,
    FeatureCatalog,
    LabelMapper,
    full_dataset_header,
    resolve_columns,
)

catalog = FeatureCatalog.default()
print(f"catalog: {catalog.retained_count} retained features, "
      f"{len(catalog.drop_identity)} identity drops, "
      f"{len(catalog.drop_constant)} constant drops, "
      f"{len(catalog.drop_duplicate)} duplicate drops")

header = full_dataset_header(catalog)
print(f"\nraw header has {len(header)} columns (including the label)")

plan = resolve_columns(header, catalog)
print(f"resolved: {plan.retained_count} retained, {plan.dropped_count} dropped")
print("dropped by reason:", plan.dropped_by_reason())

print("\nfirst 10 column decisions:")
for decision in plan.columns[:10]:
    detail = ""
    if decision.kind == "retain":
        detail = f" -> canonical index {decision.canonical_index}"
    elif decision.kind == "drop":
        detail = f" ({decision.drop_reason})"
    print(f"  {decision.name:<22} {decision.kind}{detail}")

# The dataset header repeats one feature name verbatim; the first occurrence
# is kept and the repeat is dropped as a duplicate.
positions = [i for i, name in enumerate(header) if name == "Fwd Header Length"]
print(f"\n'Fwd Header Length' occurs at positions {positions}:")
for pos in positions:
    decision = plan.columns[pos]
    print(f"  position {pos}: {decision.kind}"
          + (f" ({decision.drop_reason})" if decision.drop_reason else ""))

mapper = LabelMapper.default()
print("\nlabel mapping (case-insensitive, alias table is editable JSON):")
for raw in ("BENIGN", "Syn", "DrDoS_DNS", "UDP-lag", "WebDDoS"):
    label = mapper.try_map(raw)
    if label is None:
        print(f"  {raw!r:<14} -> unknown (row would be rejected)")
    else:
        print(f"  {raw!r:<14} -> C{label.id} {label.name}"
              f" ({'attack' if label.is_attack else 'normal'})")

print("\nthe 12 classes:")
for label in CLASS_LABELS:
    print(f"  C{label.id:<3} {label.name}")
