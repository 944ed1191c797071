"""Registers the repository root as an importable package for the test suites."""

import sys
import tempfile
import types
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
PACKAGE_NAME = "seqclass_test_package"


def install_package():
    if PACKAGE_NAME in sys.modules:
        return
    package = types.ModuleType(PACKAGE_NAME)
    package.__path__ = [str(ROOT)]
    sys.modules[PACKAGE_NAME] = package


def write_tsv(directory, name, rows):
    """rows: (id, label, text) tuples; label None writes the two-column form"""
    path = Path(directory) / name
    lines = []
    for record_id, label, text in rows:
        lines.append(f"{record_id}\t{text}" if label is None else f"{record_id}\t{label}\t{text}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def separable_rows(n=20):
    """Linearly separable toy corpus: label 1 tweets mention a reaction word"""
    positives = ["headache", "nausea", "rash", "dizzy", "insomnia"]
    negatives = ["refill", "pharmacy", "prescribed", "bought", "doctor"]
    rows = []
    for i in range(n):
        if i % 2:
            rows.append((f"t{i}", 1, f"this drug gave me {positives[i % 5]}"))
        else:
            rows.append((f"t{i}", 0, f"went to the {negatives[i % 5]} today"))
    return rows


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()


install_package()
