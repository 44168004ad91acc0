"""From CSV rows to 60x60x3 images, step by step.

Generates a small synthetic flow CSV, streams it through ingest, fits the
per-feature min/max statistics, and packs 180-row chunks into images:
rows 0-59 fill channel 1, rows 60-119 channel 2, rows 120-179 channel 3,
each row contributing one 60-pixel image row.

Run: python demos/02_tabular_to_images.py  (writes under demos/output/)
"""

import csv
from pathlib import Path

from flowpix.catalog import FeatureCatalog, LabelMapper, resolve_columns
from flowpix.ingest import ingest_all
from flowpix.pixels import encode_chunks, fit_stats, normalize, write_image
from flowpix.synth import SynthSpec, default_feature_names, generate, separable_classes

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# A malformed cell rejects its whole row, so even 0.2% of cells knocks out
# roughly 11% of rows (60 feature cells per row).
spec = SynthSpec(
    classes=separable_classes(["Syn", "BENIGN"], 560),
    feature_names=default_feature_names(),
    seed=7,
    malformed_fraction=0.002,
)
csv_path, sidecar = generate(spec, out_dir / "demo_flows.csv")
print(f"generated {csv_path} (ground truth in {sidecar.name})")

catalog = FeatureCatalog.default()
mapper = LabelMapper.default()
with open(csv_path) as fh:
    header = next(csv.reader(fh))
plan = resolve_columns(header, catalog)

records, stats_in = ingest_all(csv_path, plan, mapper)
print(f"ingest: {stats_in.rows_emitted}/{stats_in.rows_read} rows kept, "
      f"rejected {dict(stats_in.rejected)}")

norm_stats = fit_stats(records, plan.feature_names)
print(f"fitted min/max over {norm_stats.count} records; e.g. "
      f"'{norm_stats.feature_names[0]}' spans "
      f"[{norm_stats.minima[0]:.3f}, {norm_stats.maxima[0]:.3f}]")

by_class = {}
for record in records:
    by_class.setdefault(record.label, []).append(record)

images_by_class = {}
for label, class_records in sorted(by_class.items(), key=lambda kv: kv[0].id):
    images = list(encode_chunks(class_records, norm_stats))
    images_by_class[label] = images
    dropped = len(class_records) - len(images) * 180
    print(f"\nclass C{label.id} ({label.name}): {len(class_records)} records "
          f"-> {len(images)} image(s), {dropped} trailing rows dropped")
    for image in images:
        png = out_dir / f"demo_C{label.id}_{image.chunk_index}.png"
        write_image(image, png)
        print(f"  wrote {png.name}  mean pixel {image.pixels.mean():.1f}")

# One pixel, reconstructed by hand from the defining formula.
label = next(label for label, images in images_by_class.items() if images)
class_records = by_class[label]
image = images_by_class[label][0]
r, c, ch = 12, 30, 2
x = class_records[ch * 60 + r].values[c]
print(f"\npixel[{r},{c},{ch}] of the first {label.name} image: "
      f"{image.pixels[r, c, ch]}")
print(f"by hand: normalize({x:.4f}, min={norm_stats.minima[c]:.4f}, "
      f"max={norm_stats.maxima[c]:.4f}) = "
      f"{normalize(x, norm_stats.minima[c], norm_stats.maxima[c])}")
