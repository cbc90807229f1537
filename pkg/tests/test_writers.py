"""
Unit tests for the run output writers.
"""

import tempfile
import unittest
from pathlib import Path

from rqg.infra.writers import OutputWriter, format_number


def density_rows(value: float):
    return [{"row": r, "col": c, "real": value, "imag": 0.0} for r in ("0", "1") for c in ("0", "1")]


class TestOutputWriter(unittest.TestCase):
    """Test cases for the files written by one run."""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.out = Path(self.temp_dir.name) / "run"

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_reference_density_tables(self):
        written = OutputWriter(self.out).write(
            {"experiment": "cphase"}, density_rows=density_rows(0.5),
            reference_rows={"initial": density_rows(0.5), "ideal": density_rows(-0.5)})
        self.assertEqual([p.name for p in written],
                         ["summary.json", "density_matrix.tsv", "density_matrix_ideal.tsv",
                          "density_matrix_initial.tsv"])
        lines = (self.out / "density_matrix_ideal.tsv").read_text().splitlines()
        self.assertEqual(lines[0], "row\tcol\treal\timag")
        self.assertEqual(lines[1], "0\t0\t-0.5\t0")

    def test_no_reference_tables_by_default(self):
        written = OutputWriter(self.out).write({"experiment": "prepare"}, density_rows=density_rows(0.25))
        self.assertEqual([p.name for p in written], ["summary.json", "density_matrix.tsv"])

    def test_format_number(self):
        self.assertEqual(format_number(-0.0), "0")
        self.assertEqual(format_number(1 / 3), "0.333333333333")


if __name__ == '__main__':
    unittest.main()
