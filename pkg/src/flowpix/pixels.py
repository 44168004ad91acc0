"""Tabular-to-image encoding: min/max scaling, chunk packing, splits, PNG IO.

Feature values map to 8-bit pixels through per-feature min/max scaling:

    pixel = clamp(round_half_even((x - lo) / (hi - lo) * 255), 0, 255)

with a degenerate feature (hi == lo) mapping to 0 and out-of-range values
(possible at inference time under frozen statistics) clamping to the ends.

Images pack 180 consecutive same-class records: records 0-59 fill channel
1, 60-119 channel 2, 120-179 channel 3; each record's 60 feature values
form one image row in canonical feature order, giving a 60x60x3 image.
Trailing groups shorter than 180 records are dropped and counted.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np
from PIL import Image

from .catalog import ClassLabel
from .errors import ConfigError, DataError
from .ingest import FlowRecord
from .util import subseed

#: Image geometry. 60 records per channel x 3 channels = one 180-record chunk;
#: each record contributes one 60-pixel row.
RECORDS_PER_CHANNEL = 60
CHANNELS = 3
CHUNK_SIZE = RECORDS_PER_CHANNEL * CHANNELS
IMAGE_WIDTH = 60

SPLITS = ("train", "val", "test")


@dataclass
class NormStats:
    """Per-feature minima/maxima plus provenance of the fit."""

    feature_names: tuple[str, ...]
    minima: np.ndarray  # float64, shape (n_features,)
    maxima: np.ndarray
    count: int
    sources: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.minima = np.asarray(self.minima, dtype=np.float64)
        self.maxima = np.asarray(self.maxima, dtype=np.float64)
        n = len(self.feature_names)
        if self.minima.shape != (n,) or self.maxima.shape != (n,):
            raise ConfigError("stats arrays must match feature_names length")
        if np.any(self.minima > self.maxima):
            raise ConfigError("per-feature min must not exceed max")

    def to_dict(self, **meta: Any) -> dict:
        out = {
            "version": 1,
            "count": self.count,
            "sources": list(self.sources),
            "features": {
                name: {"min": float(self.minima[i]), "max": float(self.maxima[i])}
                for i, name in enumerate(self.feature_names)
            },
        }
        out.update(meta)
        return out

    @classmethod
    def from_dict(cls, raw: Mapping) -> "NormStats":
        features = raw["features"]
        names = tuple(features.keys())
        return cls(
            feature_names=names,
            minima=np.array([features[n]["min"] for n in names]),
            maxima=np.array([features[n]["max"] for n in names]),
            count=int(raw.get("count", 0)),
            sources=tuple(raw.get("sources", ())),
        )


class StatsAccumulator:
    """Single-pass elementwise min/max over value batches."""

    def __init__(self, n_features: int):
        self.n_features = n_features
        self.minima = np.full(n_features, np.inf)
        self.maxima = np.full(n_features, -np.inf)
        self.count = 0
        self._sources: dict[str, None] = {}  # insertion-ordered set

    def add(self, values: np.ndarray, source: Optional[str] = None) -> None:
        arr = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if arr.shape[1] != self.n_features:
            raise DataError(
                f"expected {self.n_features} features, got {arr.shape[1]}"
            )
        np.minimum(self.minima, arr.min(axis=0), out=self.minima)
        np.maximum(self.maxima, arr.max(axis=0), out=self.maxima)
        self.count += arr.shape[0]
        if source is not None:
            self._sources.setdefault(source)

    def finalize(self, feature_names: Sequence[str]) -> NormStats:
        if self.count == 0:
            raise DataError("no data: cannot fit normalization statistics")
        return NormStats(
            feature_names=tuple(feature_names),
            minima=self.minima.copy(),
            maxima=self.maxima.copy(),
            count=self.count,
            sources=tuple(self._sources),
        )


def fit_stats(records: Iterable[FlowRecord], feature_names: Sequence[str]) -> NormStats:
    """Fit per-feature min/max over a record stream in one pass."""
    acc = StatsAccumulator(len(feature_names))
    for record in records:
        acc.add(record.values, source=record.source_file)
    return acc.finalize(feature_names)


def normalize(x: float, feature_min: float, feature_max: float) -> int:
    """Scale one value to an integer pixel in [0, 255].

    Rounds half to even; a collapsed range maps to 0; values outside
    [feature_min, feature_max] clamp to the corresponding end. Operands are
    halved before differencing so extreme magnitudes cannot overflow.
    """
    if not feature_min <= feature_max:
        raise ConfigError("feature_min must not exceed feature_max")
    if feature_max == feature_min:
        return 0
    xc = min(max(float(x), feature_min), feature_max)
    ratio = (xc / 2 - feature_min / 2) / (feature_max / 2 - feature_min / 2)
    return int(round(ratio * 255.0))


def normalize_block(values: np.ndarray, stats: NormStats) -> np.ndarray:
    """Vectorized normalize over a (rows, features) block -> uint8 pixels."""
    arr = np.asarray(values, dtype=np.float64)
    lo = stats.minima / 2
    hi = stats.maxima / 2
    span = hi - lo
    xc = np.clip(arr / 2, lo, hi)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(span > 0, (xc - lo) / np.where(span > 0, span, 1.0), 0.0)
    return np.clip(np.rint(ratio * 255.0), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class EncodedImage:
    """One packed 60x60x3 image with its class and chunk provenance."""

    pixels: np.ndarray  # uint8, shape (60, 60, 3)
    label: ClassLabel
    chunk_index: int  # index within the class stream
    stream_offset: int  # record offset of the chunk start within the class stream
    source_file: Optional[str] = None

    def __post_init__(self) -> None:
        expected = (RECORDS_PER_CHANNEL, IMAGE_WIDTH, CHANNELS)
        if self.pixels.shape != expected or self.pixels.dtype != np.uint8:
            raise DataError(f"image must be uint8 with shape {expected}")


@dataclass
class EncodeTally:
    """Record accounting for one class stream: images*180 + dropped == records."""

    records_in: int = 0
    images: int = 0
    dropped: int = 0

    def is_conserved(self) -> bool:
        return self.images * CHUNK_SIZE + self.dropped == self.records_in


class ChunkEncoder:
    """Packs a homogeneous class stream into images, 180 records at a time.

    ``end_segment()`` drops any buffered partial chunk; the pipeline calls it
    at source-file boundaries so chunks never straddle files.
    """

    def __init__(
        self,
        stats: NormStats,
        label: Optional[ClassLabel] = None,
        first_chunk_index: int = 0,
        stream_offset: int = 0,
    ):
        if len(stats.feature_names) != IMAGE_WIDTH:
            raise DataError(
                f"chunk encoding requires {IMAGE_WIDTH} features, "
                f"stats cover {len(stats.feature_names)}"
            )
        self.stats = stats
        self.label = label
        self.tally = EncodeTally()
        self._chunk_index = first_chunk_index
        self._offset = stream_offset
        self._buffer: list[np.ndarray] = []
        self._segment_source: Optional[str] = None

    def feed(self, values: np.ndarray, label: ClassLabel,
             source: Optional[str] = None) -> Optional[EncodedImage]:
        if self.label is None:
            self.label = label
        elif label.id != self.label.id:
            raise DataError(
                f"mixed labels in chunk stream: {self.label.name} vs {label.name}"
            )
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (IMAGE_WIDTH,):
            raise DataError(f"record must have {IMAGE_WIDTH} values, got {values.shape}")
        if self._segment_source is None:
            self._segment_source = source
        self._buffer.append(values)
        self.tally.records_in += 1
        if len(self._buffer) < CHUNK_SIZE:
            return None
        block = normalize_block(np.stack(self._buffer), self.stats)
        # (180, 60) -> (3, 60, 60) channel-major, then to rows x cols x channels.
        pixels = block.reshape(CHANNELS, RECORDS_PER_CHANNEL, IMAGE_WIDTH).transpose(1, 2, 0)
        image = EncodedImage(
            pixels=np.ascontiguousarray(pixels),
            label=self.label,
            chunk_index=self._chunk_index,
            stream_offset=self._offset,
            source_file=self._segment_source,
        )
        self._chunk_index += 1
        self._offset += CHUNK_SIZE
        self._buffer.clear()
        self.tally.images += 1
        return image

    def end_segment(self) -> int:
        """Drop a trailing partial chunk; returns how many records it held."""
        dropped = len(self._buffer)
        self.tally.dropped += dropped
        self._offset += dropped
        self._buffer.clear()
        self._segment_source = None
        return dropped


def encode_chunks(
    records: Iterable[FlowRecord],
    stats: NormStats,
    tally: Optional[EncodeTally] = None,
) -> Iterator[EncodedImage]:
    """Encode one single-class record stream into images.

    Consecutive disjoint chunks of exactly 180 records each; the trailing
    partial chunk is dropped and counted in ``tally``.
    """
    encoder = ChunkEncoder(stats)
    for record in records:
        image = encoder.feed(record.values, record.label, source=record.source_file)
        if image is not None:
            yield image
    encoder.end_segment()
    if tally is not None:
        tally.records_in += encoder.tally.records_in
        tally.images += encoder.tally.images
        tally.dropped += encoder.tally.dropped


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # relative to the manifest's directory
    class_id: int
    split: str


@dataclass
class DatasetManifest:
    """Image inventory with split assignment plus the run's identity."""

    entries: list[ManifestEntry]
    seed: int
    stats_ref: str
    fingerprint: str = ""
    version: int = 1

    def by_split(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def class_counts(self, split: Optional[str] = None) -> dict[int, int]:
        out: dict[int, int] = {}
        for e in self.entries:
            if split is None or e.split == split:
                out[e.class_id] = out.get(e.class_id, 0) + 1
        return out

    def check_split_policy(self, test_per_class: int) -> None:
        """Assert the per-class test size is min(test_per_class, class total)."""
        totals = self.class_counts()
        tests = self.class_counts("test")
        for class_id, total in totals.items():
            expected = min(test_per_class, total)
            actual = tests.get(class_id, 0)
            if actual != expected:
                raise DataError(
                    f"class {class_id}: test split has {actual} images, "
                    f"policy requires {expected}"
                )

    def save(self, path: Path | str) -> None:
        buf = io.StringIO()
        buf.write(f"# version: {self.version}\n")
        buf.write(f"# seed: {self.seed}\n")
        buf.write(f"# stats_ref: {self.stats_ref}\n")
        buf.write(f"# fingerprint: {self.fingerprint}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["path", "class_id", "split"])
        for e in self.entries:
            writer.writerow([e.path, e.class_id, e.split])
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(buf.getvalue(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "DatasetManifest":
        meta: dict[str, str] = {}
        rows: list[ManifestEntry] = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            header_seen = False
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].partition(":")
                    meta[key.strip()] = value.strip()
                    continue
                if not line.strip():
                    continue
                cells = next(csv.reader([line]))
                if not header_seen:
                    if cells != ["path", "class_id", "split"]:
                        raise DataError(f"{path}: unexpected manifest columns {cells}")
                    header_seen = True
                    continue
                path_val, class_id, split = cells
                if split not in SPLITS:
                    raise DataError(f"{path}: unknown split {split!r}")
                rows.append(ManifestEntry(path_val, int(class_id), split))
        return cls(
            entries=rows,
            seed=int(meta.get("seed", 0)),
            stats_ref=meta.get("stats_ref", ""),
            fingerprint=meta.get("fingerprint", ""),
            version=int(meta.get("version", 1)),
        )


def split_dataset(
    items_by_class: Mapping[int, Sequence[Any]],
    seed: int,
    test_per_class: int = 2500,
    val_fraction: float = 0.1,
) -> tuple[dict[int, dict[str, list[Any]]], list[str]]:
    """Assign per-class items to train/val/test.

    A class with more than ``test_per_class`` items contributes a uniform
    seeded sample of exactly ``test_per_class`` to the test split; a class
    at or below the threshold goes to test entirely (such classes then have
    no training data, which is reported as a warning). Of the remainder,
    ``floor(val_fraction * n)`` items go to validation, the rest to train.
    Deterministic given the seed; per-class sub-seeds keep one class's draw
    independent of the others.
    """
    if not 0 <= val_fraction < 1:
        raise ConfigError("val_fraction must be in [0, 1)")
    if test_per_class < 0:
        raise ConfigError("test_per_class must be >= 0")
    assignment: dict[int, dict[str, list[Any]]] = {}
    warnings: list[str] = []
    for class_id in sorted(items_by_class):
        items = list(items_by_class[class_id])
        n = len(items)
        rng = np.random.default_rng(subseed(seed, "split", str(class_id)))
        if n > test_per_class:
            test_idx = set(rng.choice(n, size=test_per_class, replace=False).tolist())
        else:
            test_idx = set(range(n))
        rest = [i for i in range(n) if i not in test_idx]
        rng.shuffle(rest)
        n_val = int(len(rest) * val_fraction)
        val_idx = set(rest[:n_val])
        buckets = {split: [] for split in SPLITS}
        for i, item in enumerate(items):
            if i in test_idx:
                buckets["test"].append(item)
            elif i in val_idx:
                buckets["val"].append(item)
            else:
                buckets["train"].append(item)
        if n and not buckets["train"]:
            warnings.append(f"class {class_id}: no training images ({n} total, all in test/val)")
        assignment[class_id] = buckets
    return assignment, warnings


def write_image(image: EncodedImage, path: Path | str) -> None:
    """Write one image as lossless 8-bit RGB PNG (atomic, deterministic bytes)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        Image.fromarray(image.pixels, mode="RGB").save(tmp, format="PNG")
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def read_image(path: Path | str) -> np.ndarray:
    """Read a PNG back into a uint8 (rows, cols, 3) array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def image_relpath(split: str, class_id: int, chunk_index: int) -> str:
    """Manifest-relative location: images/<split>/C<k>/<chunk_index>.png."""
    return f"images/{split}/C{class_id}/{chunk_index:06d}.png"


def write_images(
    images: Sequence[EncodedImage],
    manifest: DatasetManifest,
    root: Path | str,
) -> list[Path]:
    """Write images to the paths named by the manifest (entry i <-> image i)."""
    if len(images) != len(manifest.entries):
        raise DataError("manifest entries and images must correspond one-to-one")
    root = Path(root)
    written = []
    for image, entry in zip(images, manifest.entries):
        if image.label.id != entry.class_id:
            raise DataError(
                f"manifest class {entry.class_id} does not match image label {image.label.id}"
            )
        target = root / entry.path
        write_image(image, target)
        written.append(target)
    return written
