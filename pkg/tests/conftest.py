import numpy as np
import pytest

from flowpix.catalog import CLASS_LABELS, FeatureCatalog, LabelMapper
from flowpix.ingest import FlowRecord


@pytest.fixture(scope="session")
def catalog():
    return FeatureCatalog.default()


@pytest.fixture(scope="session")
def mapper():
    return LabelMapper.default()


def make_records(values, label=CLASS_LABELS[0], source="fixture.csv", start_row=1):
    """Wrap a (rows, features) array into FlowRecords."""
    arr = np.asarray(values, dtype=np.float64)
    return [
        FlowRecord(values=arr[i].copy(), label=label, source_file=source,
                   row_number=start_row + i)
        for i in range(arr.shape[0])
    ]


def write_csv(path, header, rows):
    """Write a small CSV fixture with exact cell strings."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path
