"""Tests for hyperparameter validation and layered configuration."""

import unittest
from dataclasses import fields
from pathlib import Path

from . import support
from seqclass_test_package.config import TrainConfig
from seqclass_test_package.constants import PROJECT_AUTHOR, PROJECT_DESCRIPTION
from seqclass_test_package.errors import ConfigError
from seqclass_test_package.services.config_service import ConfigService, load_schema


class TrainConfigTests(unittest.TestCase):
    def test_default_hyperparameters(self):
        config = TrainConfig.load_from_dict(None)
        self.assertEqual(config.embedding_dim, 512)
        self.assertEqual(config.effective_hidden_dim, 512)
        self.assertEqual(config.learning_rate, 0.01)
        self.assertEqual(config.dropout_rate, 0.1)
        self.assertEqual(config.head_kind, "binary")

    def test_schema_lists_every_field_with_matching_default(self):
        schema = load_schema()
        defaults = TrainConfig()
        self.assertEqual(set(schema), {f.name for f in fields(TrainConfig)})
        for name, entry in schema.items():
            with self.subTest(field=name):
                self.assertEqual(entry["default"], getattr(defaults, name))

    def test_string_values_are_converted(self):
        config = TrainConfig.load_from_dict(
            {"epochs": "3", "discard_long": "false", "class_weights": "1,4", "cell_kind": "RNN"}
        )
        self.assertEqual(config.epochs, 3)
        self.assertFalse(config.discard_long)
        self.assertEqual(config.class_weights, (1.0, 4.0))
        self.assertEqual(config.cell_kind, "rnn")

    def test_invalid_values_raise_config_error(self):
        for bad in (
            {"dropout_rate": 1.0},
            {"epochs": 0},
            {"num_classes": 1},
            {"cell_kind": "gru"},
            {"class_weights": [1.0]},
            {"learning_rate": -0.1},
            {"batch_size": "many"},
        ):
            with self.subTest(config=bad):
                with self.assertRaises(ConfigError):
                    TrainConfig.load_from_dict(bad)

    def test_zero_learning_rate_is_accepted(self):
        self.assertEqual(TrainConfig.load_from_dict({"learning_rate": 0}).learning_rate, 0.0)

    def test_unknown_keys_are_ignored_with_warning(self):
        with self.assertLogs("seqclass", level="WARNING") as logs:
            config = TrainConfig.load_from_dict({"momentum": 0.9})
        self.assertEqual(config, TrainConfig())
        self.assertTrue(any("momentum" in line for line in logs.output))


class ConfigServiceTests(support.TempDirMixin, unittest.TestCase):
    def test_layers_apply_in_order(self):
        path = Path(self.tmp) / "cfg.yaml"
        path.write_text("epochs: 7\nmax_len: 20\nseed: 4\n", encoding="utf-8")
        service = ConfigService(str(path), {"seed": 9, "learning_rate": None}, task="intake")
        config = service.config
        self.assertEqual(config.num_classes, 3)
        self.assertEqual(config.max_len, 20)
        self.assertEqual(config.epochs, 7)
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.learning_rate, 0.01)

    def test_unknown_task_is_rejected(self):
        with self.assertRaises(ConfigError):
            ConfigService(task="sentiment").config

    def test_malformed_yaml_is_a_config_error(self):
        path = Path(self.tmp) / "bad.yaml"
        path.write_text("epochs: [1, 2\n", encoding="utf-8")
        with self.assertRaises(ConfigError):
            ConfigService(str(path)).config

    def test_summary_and_help_mention_settings(self):
        service = ConfigService(overrides={"cell_kind": "rnn"})
        self.assertIn("单元=rnn", service.get_config_summary())
        self.assertIn("--embedding", service.get_help_text())

    def test_supplied_keys_cover_every_layer_but_defaults(self):
        path = Path(self.tmp) / "cfg.yaml"
        path.write_text("epochs: 7\n", encoding="utf-8")
        service = ConfigService(str(path), {"seed": 9, "learning_rate": None}, task="adr")
        self.assertEqual(service.supplied_keys, {"num_classes", "max_len", "epochs", "seed"})
        self.assertEqual(ConfigService().supplied_keys, set())

    def test_help_names_the_project(self):
        text = ConfigService().get_help_text()
        self.assertIn(PROJECT_DESCRIPTION, text)
        self.assertIn(PROJECT_AUTHOR, text)


if __name__ == "__main__":
    unittest.main()
