"""Desk-scale end-to-end run: synth data -> images -> ResNet18 -> report.

Equivalent to the CLI sequence

    flowpix synth ... && flowpix encode ... && flowpix train ... \
        && flowpix eval ... && flowpix verify <run dir>

but driven through the library API. Takes a few minutes on CPU: it trains
a real ResNet18 (11.2M parameters) at 224x224, just on a tiny image set.

Run: python demos/04_full_pipeline.py  (writes under demos/output/run/)
"""

from pathlib import Path

from flowpix.pipeline import PipelineConfig, cmd_encode, cmd_eval, cmd_train, cmd_verify
from flowpix.synth import SynthSpec, default_feature_names, generate, separable_classes

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

spec = SynthSpec(
    classes=separable_classes(["Syn", "DrDoS_NTP", "BENIGN"], 1440),
    feature_names=default_feature_names(),
    seed=13,
)
csv_path, _ = generate(spec, out_dir / "pipeline_flows.csv")
print(f"fixture: {csv_path} (3 classes x 1440 rows -> 8 images each)")

config = PipelineConfig(
    inputs=(str(csv_path),),
    out_dir=str(out_dir / "run"),
    seed=13,
    test_per_class=2,      # full-scale default is 2500; desk scale here
    val_fraction=0.2,
    task="multiclass",
    epochs=4,              # full-scale protocol uses 50 for multiclass
    batch_size=8,
    learning_rate=0.003,
)
print(f"config fingerprint: {config.fingerprint()}\n")

result = cmd_encode(config)
print(f"per-class images: {result.class_counts}\n")

checkpoint = cmd_train(config)
print(f"\nbest epoch {checkpoint.epoch}, val accuracy {checkpoint.val_accuracy:.4f}\n")

report = cmd_eval(config)
print(f"\nmacro precision/recall/F1: {report.macro_precision:.2f} "
      f"{report.macro_recall:.2f} {report.macro_f1:.2f}")

cmd_verify(config.out_dir)
print(f"\nartifacts under {config.out_dir}:")
for path in sorted(Path(config.out_dir).iterdir()):
    print(f"  {path.name}")
