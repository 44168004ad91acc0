"""Confusion matrix, derived metrics, and report rendering."""

import numpy as np
import pytest
from PIL import Image

from flowpix.errors import DataError
from flowpix.metrics import (
    ConfusionMatrix,
    EvalReport,
    accuracy,
    attack_group_ids,
    collapse,
    compare_to_reference,
    confusion,
    macro_row,
    one_vs_rest_counts,
    precision_recall_f1,
    render_report,
    summary_text,
)


def brute_force_tally(actual, predicted, k):
    counts = [[0] * k for _ in range(k)]
    for a, p in zip(actual, predicted):
        counts[a][p] += 1
    return counts


class TestConfusion:
    def test_perfect_prediction(self):
        m = confusion([0, 1], [0, 1], ["a", "b"])
        np.testing.assert_array_equal(m.counts, [[1, 0], [0, 1]])

    def test_total_confusion(self):
        m = confusion([0, 0], [1, 1], ["a", "b"])
        np.testing.assert_array_equal(m.counts, [[0, 2], [0, 0]])

    def test_against_brute_force_tally(self):
        rng = np.random.default_rng(500)
        actual = rng.integers(0, 12, size=500)
        predicted = rng.integers(0, 12, size=500)
        m = confusion(actual, predicted, [f"C{i}" for i in range(12)])
        np.testing.assert_array_equal(m.counts, brute_force_tally(actual, predicted, 12))
        assert m.total == 500

    def test_length_mismatch_fatal(self):
        with pytest.raises(DataError):
            confusion([0, 1], [0], ["a", "b"])

    def test_unknown_label_fatal(self):
        with pytest.raises(DataError):
            confusion([0, 2], [0, 1], ["a", "b"])

    def test_empty_fatal(self):
        with pytest.raises(DataError):
            confusion([], [], ["a", "b"])


class TestPerClassMetrics:
    def test_hand_arithmetic(self):
        # TP=87, FP=13, FN=14 in a 2-class layout.
        m = ConfusionMatrix(np.array([[87, 14], [13, 0]]), ("pos", "neg"))
        p, r, f1 = precision_recall_f1(m, 0)
        assert p == pytest.approx(0.87)
        assert r == pytest.approx(87 / 101)
        assert round(r, 4) == 0.8614
        assert f1 == pytest.approx(2 * p * r / (p + r))
        assert one_vs_rest_counts(m, 0) == (87, 13, 14)

    def test_absent_class_is_zero_with_flag(self):
        m = ConfusionMatrix(np.array([[5, 0], [0, 0]]), ("a", "b"))
        assert precision_recall_f1(m, 1) == (0.0, 0.0, 0.0)
        report = EvalReport.build(m)
        assert report.per_class[1].zero_division == ["precision", "recall", "f1"]
        assert report.per_class[0].zero_division == []

    def test_perfect_diagonal(self):
        m = ConfusionMatrix(np.diag([3, 9, 1]), ("a", "b", "c"))
        for k in range(3):
            assert precision_recall_f1(m, k) == (1.0, 1.0, 1.0)


class TestAccuracy:
    def test_perfect(self):
        assert accuracy(ConfusionMatrix(np.array([[50, 0], [0, 50]]), ("a", "b"))) == 1.0

    def test_balanced_errors(self):
        assert accuracy(ConfusionMatrix(np.array([[40, 10], [10, 40]]), ("a", "b"))) == 0.8

    def test_binary_formula_equivalence(self):
        # trace/total == (TP+TN)/(TP+FN+TN+FP) for the 2-class layout.
        m = ConfusionMatrix(np.array([[13, 7], [2, 28]]), ("pos", "neg"))
        tp, fp, fn = one_vs_rest_counts(m, 0)
        tn = m.total - tp - fp - fn
        assert accuracy(m) == (tp + tn) / (tp + fn + tn + fp)

    def test_empty_matrix_errors(self):
        with pytest.raises(DataError):
            accuracy(ConfusionMatrix(np.zeros((2, 2), dtype=int), ("a", "b")))


class TestReportInvariants:
    def test_macro_is_unweighted_mean(self):
        rng = np.random.default_rng(8)
        m = confusion(rng.integers(0, 5, 300), rng.integers(0, 5, 300),
                      [f"k{i}" for i in range(5)])
        report = EvalReport.build(m)
        per = [precision_recall_f1(m, k) for k in range(5)]
        assert report.macro_precision == pytest.approx(np.mean([x[0] for x in per]), abs=1e-15)
        assert report.macro_recall == pytest.approx(np.mean([x[1] for x in per]), abs=1e-15)
        assert report.macro_f1 == pytest.approx(np.mean([x[2] for x in per]), abs=1e-15)

    def test_class_permutation_invariance(self):
        rng = np.random.default_rng(9)
        actual = rng.integers(0, 4, 200)
        predicted = rng.integers(0, 4, 200)
        m = confusion(actual, predicted, list("abcd"))
        perm = np.array([2, 0, 3, 1])
        inverse = np.argsort(perm)
        m_perm = confusion(inverse[actual], inverse[predicted],
                           [list("abcd")[i] for i in perm])
        r, rp = EvalReport.build(m), EvalReport.build(m_perm)
        assert rp.accuracy == r.accuracy
        assert rp.macro_f1 == pytest.approx(r.macro_f1, abs=1e-15)
        for k, orig in enumerate(perm):
            assert rp.per_class[k].precision == r.per_class[orig].precision
            assert rp.per_class[k].recall == r.per_class[orig].recall

    def test_binary_collapse_matches_relabeling(self):
        rng = np.random.default_rng(10)
        actual = rng.integers(0, 12, 400)
        predicted = rng.integers(0, 12, 400)
        m12 = confusion(actual, predicted, [f"C{i}" for i in range(12)])
        groups = attack_group_ids()
        m2 = collapse(m12, groups, ("Normal", "Attack"))
        relabeled = confusion([groups[a] for a in actual],
                              [groups[p] for p in predicted],
                              ("Normal", "Attack"))
        np.testing.assert_array_equal(m2.counts, relabeled.counts)
        assert accuracy(m2) == accuracy(relabeled)

    def test_misdetected_attack_still_attack_in_binary_view(self):
        # A UDPLag (C2) flow predicted as NetBIOS (C6) is wrong in the
        # 12-class view but still counts as a detected attack after collapse.
        m12 = confusion([2], [6], [f"C{i}" for i in range(12)])
        assert accuracy(m12) == 0.0
        m2 = collapse(m12, attack_group_ids(), ("Normal", "Attack"))
        assert accuracy(m2) == 1.0


class TestRendering:
    def make_report(self, k=12, seed=1):
        rng = np.random.default_rng(seed)
        actual = rng.integers(0, k, 600)
        predicted = np.where(rng.random(600) < 0.8, actual, rng.integers(0, k, 600))
        return EvalReport.build(confusion(actual, predicted, [f"C{i}" for i in range(k)]))

    def test_macro_row_format(self):
        report = self.make_report()
        report.macro_precision, report.macro_recall, report.macro_f1 = 0.87, 0.86, 0.86
        assert macro_row(report) == "0.87 0.86 0.86"
        assert "0.87       0.86    0.86" in summary_text(report)

    def test_artifact_files(self, tmp_path):
        report = self.make_report()
        paths = render_report(report, tmp_path, stem="eval")
        for key in ("report", "summary", "precision_chart", "confusion_chart"):
            assert paths[key].exists() and paths[key].stat().st_size > 0
        with Image.open(paths["precision_chart"]) as img:
            assert img.size[0] > 100

    def test_report_json_round_trip(self, tmp_path):
        report = self.make_report()
        report.save(tmp_path / "r.json")
        loaded = EvalReport.load(tmp_path / "r.json")
        np.testing.assert_array_equal(loaded.matrix.counts, report.matrix.counts)
        assert loaded.accuracy == report.accuracy
        assert loaded.macro_f1 == report.macro_f1

    def test_single_class_report_renders(self, tmp_path):
        m = ConfusionMatrix(np.array([[4]]), ("only",))
        report = EvalReport.build(m)
        paths = render_report(report, tmp_path)
        assert paths["precision_chart"].exists()

    def test_twelve_labeled_bars(self, tmp_path):
        report = self.make_report(k=12)
        assert [m.name for m in report.per_class] == [f"C{i}" for i in range(12)]
        render_report(report, tmp_path)


class TestReferenceComparison:
    def test_within_tolerance(self):
        m = ConfusionMatrix(np.array([[9999, 1], [0, 10000]]), ("Normal", "Attack"))
        report = EvalReport.build(m)
        assert compare_to_reference(report, "binary") == []

    def test_outside_tolerance(self):
        m = ConfusionMatrix(np.array([[80, 20], [20, 80]]), ("Normal", "Attack"))
        report = EvalReport.build(m)
        problems = compare_to_reference(report, "binary")
        assert problems and "binary accuracy" in problems[0]
