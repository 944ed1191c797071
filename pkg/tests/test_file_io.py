"""Tests for TSV ingestion, result writers and the model text format."""

import unittest
from pathlib import Path

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from . import support
from seqclass_test_package.constants import MODEL_FORMAT_HEADER
from seqclass_test_package.core.encoding import LabeledRecord, build_vocabulary, encode_dataset
from seqclass_test_package.core.metrics import build_report
from seqclass_test_package.core.model import init_model, predict_classes, predict_proba
from seqclass_test_package.core.numerics import Rng
from seqclass_test_package.errors import FormatError, LabelError, ParseError
from seqclass_test_package.utils.file_utils import FileUtils
from seqclass_test_package.utils.model_file import dump_model, load_model, save_model


class LoadTsvTests(support.TempDirMixin, unittest.TestCase):
    def write(self, text):
        path = Path(self.tmp) / "data.tsv"
        path.write_bytes(text.encode("utf-8"))
        return str(path)

    def test_parses_labeled_line(self):
        records = FileUtils.load_tsv(self.write("t1\t1\tthis drug gave me a headache\n"))
        self.assertEqual(len(records), 1)
        self.assertEqual((records[0].id, records[0].label, records[0].text), ("t1", 1, "this drug gave me a headache"))

    def test_skips_comments_and_blank_lines(self):
        records = FileUtils.load_tsv(self.write("# header\n\nt1\t0\tok\r\nt2\t1\tbad\n"))
        self.assertEqual([r.id for r in records], ["t1", "t2"])
        self.assertEqual(records[0].text, "ok")

    def test_malformed_line_names_its_number(self):
        with self.assertRaises(ParseError) as ctx:
            FileUtils.load_tsv(self.write("bad line\n"))
        self.assertEqual(ctx.exception.line_number, 1)
        self.assertIn("line 1", str(ctx.exception))

    def test_non_integer_label_is_a_parse_error(self):
        with self.assertRaises(ParseError):
            FileUtils.load_tsv(self.write("t1\t0\tfine\nt2\tadr\tnope\n"))

    def test_label_outside_class_range(self):
        with self.assertRaises(LabelError):
            FileUtils.load_tsv(self.write("t1\t2\ttext\n"), num_classes=2)

    def test_unlabeled_lines_allowed_for_prediction(self):
        records = FileUtils.load_tsv(self.write("p1\tno label here\np2\t1\tlabeled\n"), allow_unlabeled=True)
        self.assertIsNone(records[0].label)
        self.assertEqual(records[1].label, 1)

    def test_invalid_utf8_is_a_parse_error(self):
        path = Path(self.tmp) / "bad.tsv"
        path.write_bytes(b"t1\t0\t\xff\xfe\n")
        with self.assertRaises(ParseError):
            FileUtils.load_tsv(str(path))

    def test_full_training_split_size(self):
        rows = [(f"t{i}", i % 2, f"tweet {i}") for i in range(6725)]
        path = support.write_tsv(self.tmp, "train.tsv", rows)
        self.assertEqual(len(FileUtils.load_tsv(path)), 6725)


class ModelFileTests(support.TempDirMixin, unittest.TestCase):
    def setUp(self):
        super().setUp()
        self.corpus = [LabeledRecord(i, label, text) for i, label, text in support.separable_rows(30)]
        self.vocab = build_vocabulary(self.corpus)
        self.model = init_model(self.vocab.size, 4, 3, 2, "lstm", Rng(5), dropout_rate=0.1, random_bias=True)

    def test_first_line_and_header(self):
        lines = dump_model(self.model, self.vocab, 6)
        self.assertEqual(lines[0], MODEL_FORMAT_HEADER)
        self.assertIn("cell_kind: lstm", lines)
        self.assertIn(f"VOCAB {self.vocab.size - 1}", lines)

    def test_save_load_save_is_byte_identical(self):
        first = Path(self.tmp) / "a.model"
        second = Path(self.tmp) / "b.model"
        save_model(self.model, self.vocab, first, 6)
        loaded = load_model(first)
        save_model(loaded.model, loaded.vocab, second, loaded.max_len)
        self.assertEqual(first.read_bytes(), second.read_bytes())
        for name, tensor in self.model.named_tensors().items():
            assert_array_equal(loaded.model.named_tensors()[name], tensor)

    def test_loaded_model_reproduces_metrics(self):
        path = Path(self.tmp) / "m.model"
        save_model(self.model, self.vocab, path, 6)
        loaded = load_model(path)
        dataset = encode_dataset(self.corpus, self.vocab, 6)

        def report(model):
            preds = predict_classes(predict_proba(model, dataset.sequences))
            return build_report(preds, dataset.labels, 2).as_dict()

        self.assertEqual(report(self.model), report(loaded.model))

    def test_truncated_file_names_missing_section(self):
        lines = dump_model(self.model, self.vocab, 6)
        cut = next(i for i, line in enumerate(lines) if line.startswith("PARAM lstm.w_fg"))
        path = Path(self.tmp) / "cut.model"
        FileUtils.write_lines(path, lines[:cut])
        with self.assertRaises(FormatError) as ctx:
            load_model(path)
        self.assertIn("PARAM lstm.w_fg", str(ctx.exception))

    def test_version_mismatch_is_rejected(self):
        lines = dump_model(self.model, self.vocab, 6)
        lines[0] = "SEQCLASS-MODEL v2"
        path = Path(self.tmp) / "v2.model"
        FileUtils.write_lines(path, lines)
        with self.assertRaises(FormatError) as ctx:
            load_model(path)
        self.assertEqual(ctx.exception.section, "header")

    def test_count_mismatch_is_rejected(self):
        lines = dump_model(self.model, self.vocab, 6)
        idx = next(i for i, line in enumerate(lines) if line.startswith("PARAM head.b_out"))
        lines[idx + 1] += " 0.5"
        path = Path(self.tmp) / "extra.model"
        FileUtils.write_lines(path, lines)
        with self.assertRaises(FormatError):
            load_model(path)

    def test_duplicate_tensor_is_rejected(self):
        lines = dump_model(self.model, self.vocab, 6)
        idx = next(i for i, line in enumerate(lines) if line.startswith("PARAM head.b_out"))
        path = Path(self.tmp) / "dup.model"
        FileUtils.write_lines(path, lines + lines[idx:idx + 2])
        with self.assertRaises(FormatError) as ctx:
            load_model(path)
        self.assertIn("duplicate", str(ctx.exception))


class FloatFormatTests(unittest.TestCase):
    def test_random_floats_round_trip_exactly(self):
        values = Rng(123).uniform(1_000_000, -1e3, 1e3)
        text = [FileUtils.format_float(v) for v in values]
        assert_array_equal(np.array([float(t) for t in text]), values)

    @settings(max_examples=1000, deadline=None)
    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_any_finite_float_round_trips(self, value):
        self.assertEqual(float(FileUtils.format_float(value)), value)


if __name__ == "__main__":
    unittest.main()
