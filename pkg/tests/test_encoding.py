"""Tests for tokenization, vocabulary construction and sequence encoding."""

import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from . import support  # noqa: F401
from seqclass_test_package.core.encoding import (
    LabeledRecord,
    Vocabulary,
    build_vocabulary,
    check_split_shape,
    decode_sequence,
    encode_dataset,
    encode_sequence,
    tokenize,
    unknown_rate,
)
from seqclass_test_package.errors import EmptyInputError, ParameterError

words = st.text(alphabet="abcdefgh", min_size=1, max_size=6)


def records(texts, label=0):
    return [LabeledRecord(f"r{i}", label, text) for i, text in enumerate(texts)]


class TokenizeTests(unittest.TestCase):
    def test_lowercases_and_keeps_punctuation(self):
        self.assertEqual(tokenize("Took Advil, headache gone!"), ["took", "advil,", "headache", "gone!"])

    def test_empty_text_has_no_tokens(self):
        self.assertEqual(tokenize(""), [])
        self.assertEqual(tokenize("   \t "), [])


class VocabularyTests(unittest.TestCase):
    def test_frequency_order_with_first_seen_ties(self):
        vocab = build_vocabulary(records(["b a", "a c", "c d"]))
        self.assertEqual(dict(vocab.token_to_index), {"a": 1, "c": 2, "b": 3, "d": 4})
        self.assertEqual(vocab.size, 5)

    def test_top_words_keeps_most_frequent(self):
        vocab = build_vocabulary(records(["x y y z z z"]), top_words=2)
        self.assertEqual(dict(vocab.token_to_index), {"z": 1, "y": 2})

    def test_empty_corpus_is_rejected(self):
        with self.assertRaises(EmptyInputError):
            build_vocabulary([])

    def test_indices_must_be_contiguous(self):
        with self.assertRaises(ParameterError):
            Vocabulary({"a": 1, "b": 3})

    def test_unknown_token_maps_to_zero(self):
        vocab = build_vocabulary(records(["known"]))
        self.assertEqual(vocab.index_of("unseen"), 0)
        self.assertIsNone(vocab.token_of(0))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.lists(words, max_size=8).map(" ".join), min_size=1, max_size=10))
    def test_indices_are_exactly_one_to_n(self, texts):
        vocab = build_vocabulary(records(texts))
        self.assertEqual(sorted(vocab.token_to_index.values()), list(range(1, vocab.size)))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.lists(words, max_size=8).map(" ".join), min_size=1, max_size=10))
    def test_same_corpus_gives_same_mapping(self, texts):
        self.assertEqual(
            dict(build_vocabulary(records(texts)).token_to_index),
            dict(build_vocabulary(records(list(texts))).token_to_index),
        )

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.lists(words, max_size=8).map(" ".join), min_size=1, max_size=10))
    def test_full_vocabulary_has_no_unknowns_on_its_corpus(self, texts):
        corpus = records(texts)
        self.assertEqual(unknown_rate(corpus, build_vocabulary(corpus)), 0.0)


class EncodeSequenceTests(unittest.TestCase):
    def setUp(self):
        self.vocab = Vocabulary({"drug": 1, "gave": 2, "me": 3, "a": 4, "headache": 5})

    def test_left_pads_short_sequences(self):
        assert_array_equal(encode_sequence(["drug", "gave"], self.vocab, 5), [0, 0, 0, 1, 2])

    def test_truncates_to_leading_tokens(self):
        assert_array_equal(encode_sequence(["drug", "gave", "me", "a", "headache"], self.vocab, 3), [1, 2, 3])

    def test_unknown_tokens_become_zero(self):
        assert_array_equal(encode_sequence(["drug", "aspirin"], self.vocab, 3), [0, 1, 0])

    def test_empty_tokens_are_all_padding(self):
        assert_array_equal(encode_sequence([], self.vocab, 4), [0, 0, 0, 0])

    def test_non_positive_length_is_rejected(self):
        with self.assertRaises(ParameterError):
            encode_sequence(["drug"], self.vocab, 0)

    def test_decode_strips_left_padding(self):
        encoded = encode_sequence(["drug", "gave", "me"], self.vocab, 6)
        self.assertEqual(decode_sequence(encoded, self.vocab), ["drug", "gave", "me"])

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.sampled_from(["drug", "gave", "me", "a", "headache"]), min_size=1, max_size=12), st.integers(1, 12))
    def test_known_tokens_round_trip_within_length(self, tokens, max_len):
        encoded = encode_sequence(tokens, self.vocab, max_len)
        self.assertEqual(encoded.shape, (max_len,))
        self.assertEqual(decode_sequence(encoded, self.vocab), tokens[:max_len])


class EncodeDatasetTests(unittest.TestCase):
    def test_adr_training_split_shape(self):
        corpus = records([f"tweet number {i} about drug" for i in range(6725)], label=1)
        vocab = build_vocabulary(corpus)
        dataset = encode_dataset(corpus, vocab, 35)
        self.assertEqual(dataset.sequences.shape, (6725, 35))
        ok, _ = check_split_shape(dataset.sequences, "adr", "train")
        self.assertTrue(ok)

    def test_intake_training_split_shape(self):
        corpus = records([f"took my meds {i}" for i in range(1065)], label=2)
        vocab = build_vocabulary(corpus)
        dataset = encode_dataset(corpus, vocab, 34)
        self.assertEqual(dataset.sequences.shape, (1065, 34))
        ok, _ = check_split_shape(dataset.sequences, "intake", "train")
        self.assertTrue(ok)

    def test_shape_check_reports_mismatch(self):
        ok, message = check_split_shape(np.zeros((10, 35), dtype=np.int64), "adr", "valid")
        self.assertFalse(ok)
        self.assertIn("3535", message)

    def test_discard_long_drops_only_when_requested(self):
        corpus = records(["a b c", "a b c d e f"])
        vocab = build_vocabulary(corpus)
        self.assertEqual(len(encode_dataset(corpus, vocab, 4, discard_long=True)), 1)
        self.assertEqual(len(encode_dataset(corpus, vocab, 4, discard_long=False)), 2)

    def test_unlabeled_records_carry_minus_one(self):
        corpus = [LabeledRecord("p1", None, "a b")]
        vocab = build_vocabulary(corpus)
        dataset = encode_dataset(corpus, vocab, 3)
        assert_array_equal(dataset.labels, [-1])
        self.assertFalse(dataset.has_labels)

    def test_unknown_rate_counts_out_of_vocabulary_tokens(self):
        vocab = build_vocabulary(records(["a b"]))
        self.assertAlmostEqual(unknown_rate(records(["a x", "b y"]), vocab), 0.5)


if __name__ == "__main__":
    unittest.main()
