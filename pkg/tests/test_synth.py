"""Synthetic fixture generator: determinism and ground-truth accounting."""

import csv

import pytest

from flowpix.catalog import resolve_columns
from flowpix.errors import ConfigError
from flowpix.ingest import ingest_all
from flowpix.pixels import encode_chunks, fit_stats
from flowpix.synth import (
    ClassSpec,
    FeatureModel,
    SynthSpec,
    default_feature_names,
    generate,
    separable_classes,
)
from flowpix.util import read_json


def small_spec(**kw):
    defaults = dict(
        classes=separable_classes(["Syn", "BENIGN"], 50),
        feature_names=default_feature_names()[:5],
        seed=3,
    )
    defaults.update(kw)
    return SynthSpec(**defaults)


def test_same_seed_byte_identical(tmp_path):
    spec = small_spec(malformed_fraction=0.05)
    a, _ = generate(spec, tmp_path / "a.csv")
    b, _ = generate(spec, tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_different_seed_differs(tmp_path):
    a, _ = generate(small_spec(seed=1), tmp_path / "a.csv")
    b, _ = generate(small_spec(seed=2), tmp_path / "b.csv")
    assert a.read_bytes() != b.read_bytes()


def test_clean_data_rejects_nothing(tmp_path, catalog, mapper):
    path, sidecar = generate(small_spec(malformed_fraction=0.0), tmp_path / "c.csv")
    expected = read_json(sidecar)["expected_stats"]
    assert expected["rejected_by_reason"] == {}
    with open(path) as fh:
        header = next(csv.reader(fh))
    plan = resolve_columns(header, catalog)
    _, stats = ingest_all(path, plan, mapper)
    assert stats.rejected == {}
    assert stats.rows_emitted == 100


@pytest.mark.parametrize("fraction,seed", [(0.02, 1), (0.1, 2), (0.3, 3), (0.0, 4)])
def test_sidecar_matches_actual_ingest(tmp_path, catalog, mapper, fraction, seed):
    spec = small_spec(seed=seed, malformed_fraction=fraction)
    path, sidecar = generate(spec, tmp_path / f"m{seed}.csv")
    with open(path) as fh:
        header = next(csv.reader(fh))
    plan = resolve_columns(header, catalog)
    _, stats = ingest_all(path, plan, mapper)
    assert stats.to_dict() == read_json(sidecar)["expected_stats"]
    assert stats.is_conserved()


def test_unknown_label_class_counted(tmp_path, catalog, mapper):
    spec = small_spec(classes=separable_classes(["Syn", "NotARealAttack"], 30))
    path, sidecar = generate(spec, tmp_path / "u.csv")
    expected = read_json(sidecar)["expected_stats"]
    assert expected["rejected_by_reason"] == {"unknown_label": 30}
    with open(path) as fh:
        header = next(csv.reader(fh))
    _, stats = ingest_all(path, resolve_columns(header, catalog), mapper)
    assert stats.to_dict() == expected


def test_chunk_arithmetic_downstream(tmp_path, catalog, mapper):
    # 2 classes x 360 rows -> 2 images per class after encoding.
    spec = SynthSpec(
        classes=separable_classes(["Syn", "BENIGN"], 360),
        feature_names=default_feature_names(),
        seed=9,
    )
    path, _ = generate(spec, tmp_path / "big.csv")
    with open(path) as fh:
        header = next(csv.reader(fh))
    plan = resolve_columns(header, catalog)
    records, stats = ingest_all(path, plan, mapper)
    assert stats.rows_emitted == 720
    per_class = {}
    for record in records:
        per_class.setdefault(record.label.id, []).append(record)
    all_stats = fit_stats(records, plan.feature_names)
    for class_records in per_class.values():
        images = list(encode_chunks(class_records, all_stats))
        assert len(images) == 2


def test_feature_distributions_respected(tmp_path):
    spec = SynthSpec(
        classes=(
            ClassSpec(
                label="Syn", rows=40,
                base=FeatureModel("constant", 5.0),
                features={"Flow Duration": FeatureModel("uniform", 10.0, 20.0)},
            ),
        ),
        feature_names=default_feature_names()[:3],
        seed=12,
        shuffle=False,
    )
    path, _ = generate(spec, tmp_path / "d.csv")
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    first = header.index("Flow Duration")
    for row in rows:
        assert 10.0 <= float(row[first]) <= 20.0
        assert float(row[1]) == 5.0 and float(row[2]) == 5.0


def test_row_counts_and_header(tmp_path):
    spec = small_spec()
    path, _ = generate(spec, tmp_path / "h.csv")
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_rows = sum(1 for _ in reader)
    assert header == list(spec.feature_names) + ["Label"]
    assert n_rows == 100


def test_non_canonical_feature_order_rejected(tmp_path):
    names = default_feature_names()
    spec = small_spec(feature_names=(names[3], names[0]))
    with pytest.raises(ConfigError):
        generate(spec, tmp_path / "x.csv")


def test_unknown_feature_name_rejected(tmp_path):
    spec = small_spec(feature_names=("Made Up Feature",))
    with pytest.raises(ConfigError):
        generate(spec, tmp_path / "x.csv")


def test_invalid_fraction_rejected():
    with pytest.raises(ConfigError):
        small_spec(malformed_fraction=1.0)
