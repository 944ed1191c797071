"""Tests for confusion counting, positive-class and subset micro-averaged scores."""

import itertools
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from . import support  # noqa: F401
from seqclass_test_package.core.metrics import (
    REPORT_KEYS,
    ConfusionMatrix,
    accuracy,
    binary_prf,
    build_report,
    confusion,
    default_subset,
    f_score,
    format_report,
    micro_prf_subset,
)
from seqclass_test_package.errors import LabelError, ParameterError


def paired_labels(k):
    return st.integers(1, 60).flatmap(
        lambda n: st.tuples(
            st.lists(st.integers(0, k - 1), min_size=n, max_size=n),
            st.lists(st.integers(0, k - 1), min_size=n, max_size=n),
        )
    )


def tally(preds, labels, classes):
    tp = sum(1 for p, y in zip(preds, labels) if p == y and y in classes)
    fp = sum(1 for p, y in zip(preds, labels) if p in classes and p != y)
    fn = sum(1 for p, y in zip(preds, labels) if y in classes and p != y)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


class SharedTaskScoreTests(unittest.TestCase):
    """Counts whose rounded P/R/F reproduce the shared-task result table."""

    def assertRounded(self, scores, expected):
        self.assertEqual(tuple(round(v, 3) for v in scores), expected)

    def test_adr_positive_class_scores(self):
        cm = ConfusionMatrix(2, np.array([[1000, 201], [83, 17]], dtype=np.int64))
        self.assertRounded(binary_prf(cm), (0.078, 0.17, 0.107))

    def test_intake_micro_scores_on_first_two_classes(self):
        cm = ConfusionMatrix(3, np.array([[300, 0, 300], [0, 187, 213], [50, 41, 1000]], dtype=np.int64))
        self.assertRounded(micro_prf_subset(cm, (0, 1)), (0.843, 0.487, 0.617))

    def test_low_recall_intake_scores(self):
        cm = ConfusionMatrix(3, np.array([[20, 0, 141], [0, 9, 100], [41, 0, 500]], dtype=np.int64))
        self.assertRounded(micro_prf_subset(cm, (0, 1)), (0.414, 0.107, 0.171))
        # the F column comes from unrounded P and R; the rounded pair alone gives 0.170
        self.assertEqual(round(f_score(0.414, 0.107), 3), 0.170)

    def test_harmonic_mean_of_rounded_values(self):
        self.assertEqual(round(f_score(0.078, 0.17), 3), 0.107)
        self.assertEqual(round(f_score(0.843, 0.487), 3), 0.617)
        self.assertEqual(f_score(0.0, 0.0), 0.0)


class ConfusionTests(unittest.TestCase):
    def test_rows_are_true_columns_are_predicted(self):
        cm = confusion([1, 1, 0, 2], [1, 0, 0, 2], 3)
        self.assertEqual(cm.counts.tolist(), [[1, 1, 0], [0, 1, 0], [0, 0, 1]])

    def test_length_mismatch_is_rejected(self):
        with self.assertRaises(LabelError):
            confusion([0, 1], [0], 2)

    def test_out_of_range_class_is_rejected(self):
        with self.assertRaises(LabelError):
            confusion([0, 3], [0, 1], 3)

    def test_collapse_to_positive_versus_rest(self):
        cm = confusion([0, 1, 2, 1, 2], [1, 1, 2, 0, 1], 3).collapse(1)
        self.assertEqual(cm.counts.tolist(), [[1, 1], [2, 1]])


class ScoreTests(unittest.TestCase):
    def test_zero_denominators_give_zero(self):
        cm = confusion([0, 0, 0], [0, 0, 0], 2)
        self.assertEqual(binary_prf(cm), (0.0, 0.0, 0.0))

    def test_all_positive_predictor_on_imbalanced_labels(self):
        labels = [1, 0, 0, 0, 0, 0, 0, 1, 0, 0]
        preds = [1] * len(labels)
        precision, recall, f = binary_prf(confusion(preds, labels, 2))
        self.assertAlmostEqual(precision, 0.2)
        self.assertAlmostEqual(recall, 1.0)
        self.assertAlmostEqual(f, 2 * 0.2 / 1.2)

    def test_empty_subset_is_rejected(self):
        with self.assertRaises(ParameterError):
            micro_prf_subset(confusion([0], [0], 3), [])

    def test_default_subsets(self):
        self.assertEqual(default_subset(2), (1,))
        self.assertEqual(default_subset(3), (0, 1))

    @settings(max_examples=300, deadline=None)
    @given(paired_labels(3), st.sampled_from([s for r in (1, 2, 3) for s in itertools.combinations(range(3), r)]))
    def test_subset_scores_match_brute_force_tally(self, pair, subset):
        preds, labels = pair
        expected = tally(preds, labels, set(subset))
        actual = micro_prf_subset(confusion(preds, labels, 3), subset)
        np.testing.assert_allclose(actual, expected, atol=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(paired_labels(4))
    def test_full_class_set_micro_equals_accuracy(self, pair):
        preds, labels = pair
        cm = confusion(preds, labels, 4)
        precision, recall, f = micro_prf_subset(cm, range(4))
        self.assertAlmostEqual(precision, accuracy(cm))
        self.assertAlmostEqual(recall, accuracy(cm))
        self.assertAlmostEqual(f, accuracy(cm))


class ReportTests(unittest.TestCase):
    def test_perfect_predictions_score_one(self):
        labels = [0, 1, 2, 2, 1, 0]
        report = build_report(labels, labels, 3)
        self.assertTrue(all(v == 1.0 for v in report.as_dict().values()))

    def test_report_text_ends_with_key_value_block(self):
        report = build_report([1, 0, 1, 1], [1, 0, 0, 1], 2)
        lines = format_report(report, ("no-adr", "adr")).splitlines()
        self.assertTrue(lines[0].startswith("# threshold=0.5"))
        tail = lines[-len(REPORT_KEYS):]
        self.assertEqual([line.split("=")[0] for line in tail], list(REPORT_KEYS))
        self.assertIn("adr_precision=0.667", tail)
        self.assertIn("accuracy=0.750", tail)

    def test_multiclass_adr_keys_use_positive_collapse(self):
        preds = [0, 1, 2, 1, 2]
        labels = [1, 1, 2, 0, 1]
        report = build_report(preds, labels, 3, positive=1)
        np.testing.assert_allclose(report.adr, tally(preds, labels, {1}), atol=1e-12)


if __name__ == "__main__":
    unittest.main()
