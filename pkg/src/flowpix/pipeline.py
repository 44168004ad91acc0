"""Stage orchestration behind the CLI: encode, train, eval, predict, verify.

Every stage reads and writes artifacts under one run directory and stamps
them with the config fingerprint and seed, so a finished run directory is
self-describing and `verify` can cross-check that its artifacts belong to
one configuration. Re-running a stage with identical inputs and config
rebuilds byte-identical artifacts (nothing embeds timestamps).

The encode stage streams rows through per-class temporary spools (raw
float64) so memory stays bounded on multi-gigabyte inputs: pass one
ingests and spools, then chunks are assigned to splits, normalization
statistics are fitted (on training chunks only, or globally), and a final
pass over the spools emits the PNG tree.
"""

from __future__ import annotations

import csv
import glob
import io
import shutil
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .catalog import (
    CLASS_LABELS,
    ColumnPlan,
    FeatureCatalog,
    LabelMapper,
    class_by_id,
    resolve_columns,
)
from .errors import ConfigError, DataError, SchemaError
from .ingest import IngestStats, ingest_file
from .metrics import EvalReport, confusion, render_report
from .model import (
    BINARY_CLASS_NAMES,
    Checkpoint,
    ImageSet,
    ModelConfig,
    build_model,
    predict,
    train,
)
from .pixels import (
    CHUNK_SIZE,
    ChunkEncoder,
    DatasetManifest,
    ManifestEntry,
    StatsAccumulator,
    image_relpath,
    read_image,
    split_dataset,
    write_image,
)
from .util import fingerprint, read_json, write_json_atomic

STATS_MODES = ("train-only", "global")


@dataclass
class PipelineConfig:
    """One run's knobs; everything an artifact's fingerprint covers."""

    inputs: tuple[str, ...] = ()
    out_dir: str = "run"
    catalog_path: Optional[str] = None
    labels_path: Optional[str] = None
    seed: int = 0
    test_per_class: int = 2500
    val_fraction: float = 0.1
    stats_mode: str = "train-only"
    task: str = "multiclass"
    learning_rate: float = 1e-4
    momentum: float = 0.9
    epochs: Optional[int] = None
    batch_size: int = 32
    deterministic: bool = True

    def __post_init__(self) -> None:
        self.inputs = tuple(self.inputs)
        if self.stats_mode not in STATS_MODES:
            raise ConfigError(f"stats_mode must be one of {STATS_MODES}")
        if not 0 <= self.val_fraction < 1:
            raise ConfigError("val_fraction must be in [0, 1)")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            task=self.task,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            deterministic=self.deterministic,
        )

    def fingerprint(self) -> str:
        """Digest of the semantic fields (the output location is excluded)."""
        payload = {
            "inputs": list(self.inputs),
            "catalog": self.catalog_path or "default",
            "labels": self.labels_path or "default",
            "seed": self.seed,
            "test_per_class": self.test_per_class,
            "val_fraction": self.val_fraction,
            "stats_mode": self.stats_mode,
            "model": self.model_config().to_dict(),
        }
        return fingerprint(payload)

    def load_catalog(self) -> FeatureCatalog:
        return FeatureCatalog.load(self.catalog_path) if self.catalog_path else FeatureCatalog.default()

    def load_mapper(self) -> LabelMapper:
        return LabelMapper.load(self.labels_path) if self.labels_path else LabelMapper.default()

    @classmethod
    def from_sources(cls, file_values: Optional[dict] = None, **overrides) -> "PipelineConfig":
        """Build from config-file values overridden by explicit (non-None) flags."""
        known = {f.name for f in fields(cls)}
        merged: dict = {}
        for source in (file_values or {}), overrides:
            for key, value in source.items():
                if key not in known:
                    raise ConfigError(f"unknown config key: {key}")
                if value is not None:
                    merged[key] = value
        if "inputs" in merged and isinstance(merged["inputs"], str):
            merged["inputs"] = (merged["inputs"],)
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    # Artifact locations within the run directory.
    def path(self, name: str) -> Path:
        return Path(self.out_dir) / name


def _expand_inputs(patterns) -> list[Path]:
    files: list[Path] = []
    for pattern in patterns:
        p = Path(pattern)
        if p.is_dir():
            files.extend(sorted(p.glob("*.csv")))
        elif p.exists():
            files.append(p)
        else:
            files.extend(Path(m) for m in sorted(glob.glob(pattern)))
    seen = set()
    unique = []
    for f in files:
        if f not in seen:
            seen.add(f)
            unique.append(f)
    return unique


def _read_header(path: Path) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return next(csv.reader(fh))
    except StopIteration:
        raise DataError(f"{path} is empty (no header row)")
    except (OSError, csv.Error) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


class _ClassSpool:
    """Append-only per-class store of cleaned rows (raw float64), segmented
    by source file so chunks never straddle files."""

    def __init__(self, directory: Path, class_id: int, n_features: int):
        self.class_id = class_id
        self.n_features = n_features
        self.path = directory / f"class_{class_id}.f64"
        self._fh = open(self.path, "wb")
        self.segments: list[dict] = []  # {file, records, start}
        self._total = 0
        self._current: Optional[dict] = None

    def start_segment(self, file_id: str) -> None:
        self._current = {"file": file_id, "records": 0, "start": self._total}

    def add(self, values: np.ndarray) -> None:
        self._fh.write(values.tobytes())
        self._current["records"] += 1
        self._total += 1

    def end_segment(self) -> None:
        if self._current and self._current["records"] > 0:
            self.segments.append(self._current)
        self._current = None

    def close_writer(self) -> None:
        self._fh.close()

    def read(self, start_record: int, n_records: int) -> np.ndarray:
        with open(self.path, "rb") as fh:
            fh.seek(start_record * self.n_features * 8)
            data = np.fromfile(fh, dtype=np.float64, count=n_records * self.n_features)
        return data.reshape(n_records, self.n_features)


@dataclass
class EncodeResult:
    manifest_path: Path
    stats_path: Path
    report_path: Path
    images_written: int
    class_counts: dict[int, int]
    warnings: list[str] = field(default_factory=list)
    file_errors: dict[str, str] = field(default_factory=dict)


def cmd_encode(config: PipelineConfig, log: Callable[[str], None] = print) -> EncodeResult:
    """Ingest CSVs, fit statistics, encode images, split, and write the tree."""
    files = _expand_inputs(config.inputs)
    if not files:
        raise DataError("no data: no input CSV files found")
    catalog = config.load_catalog()
    mapper = config.load_mapper()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_fp = config.fingerprint()

    plans: dict[Path, ColumnPlan] = {}
    feature_names: Optional[tuple[str, ...]] = None
    feature_key: Optional[tuple[str, ...]] = None  # case-folded comparison key
    file_errors: dict[str, str] = {}
    warnings: list[str] = []
    for path in files:
        try:
            plan = resolve_columns(_read_header(path), catalog)
        except (SchemaError, DataError) as exc:
            file_errors[str(path)] = str(exc)
            continue
        key = tuple(n.casefold() for n in plan.feature_names)
        if feature_names is None:
            feature_names = plan.feature_names
            feature_key = key
        elif key != feature_key:
            file_errors[str(path)] = "feature set differs from the first input file"
            continue
        for w in plan.warnings:
            warnings.append(f"{path}: {w}")
        plans[path] = plan
    if feature_names is None or not plans:
        raise DataError("no data: every input file failed header resolution")

    n_features = len(feature_names)
    spool_dir = Path(tempfile.mkdtemp(prefix="flowpix_spool_", dir=out_dir))
    spools: dict[int, _ClassSpool] = {}
    per_file_stats: dict[str, IngestStats] = {}
    totals = IngestStats()
    global_acc = StatsAccumulator(n_features)
    try:
        for path, plan in plans.items():
            stats = IngestStats()
            for spool in spools.values():
                spool.start_segment(str(path))
            try:
                for record in ingest_file(path, plan, mapper, stats=stats):
                    cid = record.label.id
                    if cid not in spools:
                        spools[cid] = _ClassSpool(spool_dir, cid, n_features)
                        spools[cid].start_segment(str(path))
                    spools[cid].add(record.values)
                    global_acc.add(record.values, source=str(path))
            except (SchemaError, DataError) as exc:
                file_errors[str(path)] = str(exc)
            for spool in spools.values():
                spool.end_segment()
            per_file_stats[str(path)] = stats
            totals.merge(stats)
            log(
                f"ingested {path}: {stats.rows_emitted}/{stats.rows_read} rows kept"
            )
        for spool in spools.values():
            spool.close_writer()
        if totals.rows_emitted == 0:
            raise DataError("no data: all rows were rejected or files failed")

        # Chunk accounting per class, then split assignment over chunk handles.
        handles_by_class: dict[int, list[tuple]] = {}
        encode_counts: dict[int, dict[str, int]] = {}
        for cid, spool in sorted(spools.items()):
            handles = []
            chunk_index = 0
            dropped = 0
            for seg_i, seg in enumerate(spool.segments):
                n_chunks = seg["records"] // CHUNK_SIZE
                dropped += seg["records"] - n_chunks * CHUNK_SIZE
                for local in range(n_chunks):
                    handles.append((cid, chunk_index, seg_i, local))
                    chunk_index += 1
            handles_by_class[cid] = handles
            encode_counts[cid] = {
                "records": sum(s["records"] for s in spool.segments),
                "images": len(handles),
                "dropped_trailing": dropped,
            }
        if not any(handles_by_class.values()):
            raise DataError(
                f"no data: no class accumulated a full chunk of {CHUNK_SIZE} rows"
            )

        assignment, split_warnings = split_dataset(
            {cid: h for cid, h in handles_by_class.items() if h},
            seed=config.seed,
            test_per_class=config.test_per_class,
            val_fraction=config.val_fraction,
        )
        warnings.extend(split_warnings)
        split_of: dict[tuple, str] = {}
        for cid, buckets in assignment.items():
            for split, items in buckets.items():
                for handle in items:
                    split_of[handle] = split

        # Normalization statistics: training chunks only, or every kept row.
        if config.stats_mode == "global":
            stats = global_acc.finalize(feature_names)
        else:
            train_acc = StatsAccumulator(n_features)
            for cid, buckets in assignment.items():
                spool = spools[cid]
                for (_, _, seg_i, local) in buckets["train"]:
                    seg = spool.segments[seg_i]
                    block = spool.read(seg["start"] + local * CHUNK_SIZE, CHUNK_SIZE)
                    train_acc.add(block, source=seg["file"])
            if train_acc.count == 0:
                raise DataError(
                    "no training chunks to fit statistics on; lower test_per_class "
                    "or use stats_mode='global'"
                )
            stats = train_acc.finalize(feature_names)
        stats_ref = fingerprint(stats.to_dict())

        # Encode every chunk and write it straight to its split directory.
        entries: list[ManifestEntry] = []
        images_written = 0
        for cid in sorted(handles_by_class):
            spool = spools[cid]
            label = class_by_id(cid)
            encoder = ChunkEncoder(stats, label=label)
            chunk_index = 0
            for seg_i, seg in enumerate(spool.segments):
                n_chunks = seg["records"] // CHUNK_SIZE
                for local in range(n_chunks):
                    block = spool.read(seg["start"] + local * CHUNK_SIZE, CHUNK_SIZE)
                    image = None
                    for row in block:
                        image = encoder.feed(row, label, source=seg["file"])
                    assert image is not None
                    split = split_of[(cid, chunk_index, seg_i, local)]
                    rel = image_relpath(split, cid, chunk_index)
                    write_image(image, out_dir / rel)
                    entries.append(ManifestEntry(rel, cid, split))
                    images_written += 1
                    chunk_index += 1
                encoder.end_segment()
        manifest = DatasetManifest(
            entries=entries, seed=config.seed, stats_ref=stats_ref, fingerprint=run_fp
        )
        manifest.check_split_policy(config.test_per_class)
        manifest.save(out_dir / "manifest.csv")
        write_json_atomic(
            out_dir / "stats.json",
            stats.to_dict(
                fingerprint=run_fp, seed=config.seed, stats_ref=stats_ref,
                stats_mode=config.stats_mode,
            ),
        )
        write_json_atomic(
            out_dir / "ingest_report.json",
            {
                "version": 1,
                "fingerprint": run_fp,
                "seed": config.seed,
                "retained_features": list(feature_names),
                "per_file": {p: s.to_dict() for p, s in sorted(per_file_stats.items())},
                "totals": totals.to_dict(),
                "encode_per_class": {
                    str(cid): encode_counts[cid] for cid in sorted(encode_counts)
                },
                "warnings": warnings,
                "file_errors": dict(sorted(file_errors.items())),
            },
        )
    finally:
        shutil.rmtree(spool_dir, ignore_errors=True)

    log(
        f"encoded {images_written} images across {len(handles_by_class)} classes "
        f"-> {out_dir / 'manifest.csv'}"
    )
    return EncodeResult(
        manifest_path=out_dir / "manifest.csv",
        stats_path=out_dir / "stats.json",
        report_path=out_dir / "ingest_report.json",
        images_written=images_written,
        class_counts={cid: c["images"] for cid, c in encode_counts.items()},
        warnings=warnings,
        file_errors=file_errors,
    )


def _load_split(config: PipelineConfig, manifest: DatasetManifest, split: str) -> ImageSet:
    entries = manifest.by_split(split)
    if not entries:
        return ImageSet(
            pixels=np.zeros((0, 60, 60, 3), dtype=np.uint8),
            targets=np.zeros(0, dtype=np.int64),
        )
    images = []
    for entry in entries:
        pixels = read_image(Path(config.out_dir) / entry.path)
        if images and pixels.shape != images[0].shape:
            raise DataError(
                f"{entry.path}: image shape {pixels.shape} differs from "
                f"{images[0].shape} elsewhere in the manifest"
            )
        images.append(pixels)
    if config.task == "binary":
        targets = [1 if class_by_id(e.class_id).is_attack else 0 for e in entries]
    else:
        targets = [e.class_id for e in entries]
    return ImageSet(pixels=np.stack(images), targets=np.array(targets, dtype=np.int64))


def cmd_train(config: PipelineConfig, log: Callable[[str], None] = print) -> Checkpoint:
    """Train on the encoded manifest's train split, checkpoint the best epoch."""
    manifest = DatasetManifest.load(Path(config.out_dir) / "manifest.csv")
    train_set = _load_split(config, manifest, "train")
    val_set = _load_split(config, manifest, "val")
    if len(train_set) == 0:
        raise DataError("train split is empty; re-encode with a lower test_per_class")
    if len(val_set) == 0:
        raise DataError("validation split is empty; re-encode with a higher val_fraction")
    model_config = config.model_config()
    model = build_model(model_config)
    log(
        f"training {model_config.task} head on {len(train_set)} images "
        f"(val {len(val_set)}), {model_config.resolved_epochs} epochs"
    )
    checkpoint = train(
        model,
        train_set,
        val_set,
        model_config,
        stats_ref=manifest.stats_ref,
        fingerprint=config.fingerprint(),
        log=log,
    )
    checkpoint.save(Path(config.out_dir) / "checkpoint")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "train_loss", "train_accuracy", "val_accuracy"])
    for h in checkpoint.history:
        writer.writerow([h.epoch, repr(h.train_loss), repr(h.train_accuracy),
                         repr(h.val_accuracy)])
    (Path(config.out_dir) / "history.csv").write_text(buf.getvalue(), encoding="utf-8")
    log(
        f"best checkpoint: epoch {checkpoint.epoch} "
        f"(val accuracy {checkpoint.val_accuracy:.4f})"
    )
    return checkpoint


def cmd_eval(config: PipelineConfig, log: Callable[[str], None] = print) -> EvalReport:
    """Score the checkpoint on the test split and render the report artifacts."""
    out_dir = Path(config.out_dir)
    manifest = DatasetManifest.load(out_dir / "manifest.csv")
    checkpoint = Checkpoint.load(out_dir / "checkpoint")
    if checkpoint.config.task != config.task:
        raise ConfigError(
            f"checkpoint was trained for task {checkpoint.config.task!r}, "
            f"config asks for {config.task!r}"
        )
    test_set = _load_split(config, manifest, "test")
    if len(test_set) == 0:
        raise DataError("test split is empty")
    predicted, _scores = predict(checkpoint, test_set.pixels)
    if config.task == "binary":
        class_names = BINARY_CLASS_NAMES
    else:
        class_names = tuple(f"C{label.id}" for label in CLASS_LABELS)
    matrix = confusion(test_set.targets, predicted, class_names)
    report = EvalReport.build(
        matrix,
        task=config.task,
        split="test",
        seed=config.seed,
        fingerprint=config.fingerprint(),
        stats_ref=manifest.stats_ref,
        checkpoint_epoch=checkpoint.epoch,
        class_display_names={
            f"C{label.id}": label.name for label in CLASS_LABELS
        } if config.task != "binary" else dict(zip(BINARY_CLASS_NAMES, BINARY_CLASS_NAMES)),
    )
    paths = render_report(report, out_dir, stem="eval")
    log(f"accuracy {report.accuracy:.4f}; artifacts: {paths['report']}")
    return report


def cmd_predict(
    config: PipelineConfig,
    images_dir: Path | str,
    log: Callable[[str], None] = print,
) -> Path:
    """Classify every PNG under a directory; writes predictions.csv."""
    out_dir = Path(config.out_dir)
    checkpoint = Checkpoint.load(out_dir / "checkpoint")
    paths = sorted(Path(images_dir).rglob("*.png"))
    if not paths:
        raise DataError(f"no PNG images under {images_dir}")
    loaded = [read_image(p) for p in paths]
    bad = [str(p) for p, a in zip(paths, loaded) if a.shape != loaded[0].shape]
    if bad:
        raise DataError(
            f"image shape mismatch (expected {loaded[0].shape}): {', '.join(bad)}"
        )
    pixels = np.stack(loaded)
    predicted, scores = predict(checkpoint, pixels)
    out_path = out_dir / "predictions.csv"
    buf = io.StringIO()
    buf.write(f"# fingerprint: {config.fingerprint()}\n")
    buf.write(f"# seed: {config.seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path", "predicted_id", "predicted_name", "score"])
    for i, p in enumerate(paths):
        if checkpoint.config.task == "binary":
            name = BINARY_CLASS_NAMES[predicted[i]]
            score = float(scores[i])
        else:
            name = class_by_id(int(predicted[i])).name
            score = float(scores[i, predicted[i]])
        writer.writerow([str(p), int(predicted[i]), name, repr(score)])
    out_path.write_text(buf.getvalue(), encoding="utf-8")
    log(f"wrote {len(paths)} predictions -> {out_path}")
    return out_path


def cmd_report(
    config: PipelineConfig,
    report_path: Optional[Path | str] = None,
    log: Callable[[str], None] = print,
) -> dict[str, Path]:
    """Re-render summary and charts from a saved machine-readable report."""
    out_dir = Path(config.out_dir)
    report_path = Path(report_path) if report_path else out_dir / "eval_report.json"
    report = EvalReport.load(report_path)
    paths = render_report(report, out_dir, stem="eval")
    log(f"re-rendered report artifacts under {out_dir}")
    return paths


def cmd_verify(run_dir: Path | str, log: Callable[[str], None] = print) -> dict[str, str]:
    """Cross-check fingerprint/seed consistency across a run directory."""
    run_dir = Path(run_dir)
    found: dict[str, tuple[str, str]] = {}

    manifest_path = run_dir / "manifest.csv"
    if manifest_path.exists():
        manifest = DatasetManifest.load(manifest_path)
        found["manifest.csv"] = (manifest.fingerprint, str(manifest.seed))
    for name, fp_key, seed_key in (
        ("stats.json", "fingerprint", "seed"),
        ("ingest_report.json", "fingerprint", "seed"),
    ):
        path = run_dir / name
        if path.exists():
            raw = read_json(path)
            found[name] = (str(raw.get(fp_key, "")), str(raw.get(seed_key, "")))
    checkpoint_meta = run_dir / "checkpoint.json"
    if checkpoint_meta.exists():
        raw = read_json(checkpoint_meta)
        found["checkpoint.json"] = (
            str(raw.get("fingerprint", "")),
            str(raw.get("config", {}).get("seed", "")),
        )
    report_path = run_dir / "eval_report.json"
    if report_path.exists():
        raw = read_json(report_path)
        meta = raw.get("metadata", {})
        found["eval_report.json"] = (str(meta.get("fingerprint", "")), str(meta.get("seed", "")))

    if not found:
        raise DataError(f"no pipeline artifacts found under {run_dir}")
    fingerprints = {fp for fp, _ in found.values()}
    seeds = {seed for _, seed in found.values()}
    if len(fingerprints) > 1 or len(seeds) > 1:
        detail = ", ".join(f"{k}: fp={v[0]} seed={v[1]}" for k, v in sorted(found.items()))
        raise DataError(f"artifact fingerprints disagree: {detail}")
    log(
        f"verified {len(found)} artifact(s): fingerprint {fingerprints.pop()} "
        f"seed {seeds.pop()}"
    )
    return {name: fp for name, (fp, _) in found.items()}
