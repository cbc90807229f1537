"""
Unit tests for the RQG command-line interfaces.
"""

import json
import tempfile
import unittest
from pathlib import Path

from click.testing import CliRunner

from rqg.cli.presets import main as presets_main
from rqg.cli.run import main as run_main


class TestRunCommand(unittest.TestCase):
    """Test cases for rqg-run."""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.out = Path(self.temp_dir.name)
        self.runner = CliRunner()

    def tearDown(self):
        self.temp_dir.cleanup()

    def invoke(self, *args, out=None):
        return self.runner.invoke(run_main, ["--out", str(out or self.out / "run"), *args])

    def test_unknown_experiment(self):
        result = self.invoke("-e", "teleport", "-p", "paper-cphase")
        self.assertEqual(result.exit_code, 2)
        self.assertFalse((self.out / "run").exists())

    def test_unknown_preset(self):
        result = self.invoke("-e", "cphase", "-p", "nonexistent")
        self.assertEqual(result.exit_code, 2)

    def test_malformed_override(self):
        result = self.invoke("-e", "cphase", "-p", "paper-cphase", "--set", "params.omega_ge")
        self.assertEqual(result.exit_code, 2)

    def test_physics_error_exits_one(self):
        result = self.invoke("-e", "ccphase", "-p", "paper-ccphase", "--cutoff", "2",
                             "--no-calibrate", "--set", "params.g_ef.1=0.3")
        self.assertEqual(result.exit_code, 1)

    def test_shift_table(self):
        result = self.invoke("-e", "shift-table", "-p", "paper-ccphase", "--cutoff", "2")
        self.assertEqual(result.exit_code, 0, result.output)
        summary = json.loads((self.out / "run" / "summary.json").read_text())
        self.assertEqual(sorted(row["N"] for row in summary["shift_table"]), [0, 2, 6, 8])

        manifest = json.loads((self.out / "run" / "manifest.json").read_text())
        self.assertEqual(list(manifest["files"]), ["summary.json"])
        self.assertEqual(manifest["config"]["run"]["preset"], "paper-ccphase")
        self.assertIn("version", manifest)

    def test_runs_are_deterministic(self):
        outputs = []
        for name in ("first", "second"):
            result = self.invoke("-e", "prepare", "-p", "paper-cphase", "--cutoff", "2",
                                 out=self.out / name)
            self.assertEqual(result.exit_code, 0, result.output)
            outputs.append([(self.out / name / f).read_bytes()
                            for f in ("summary.json", "trajectory.tsv", "density_matrix.tsv")])
        self.assertEqual(outputs[0], outputs[1])

    def test_trajectory_header(self):
        result = self.invoke("-e", "prepare", "-p", "paper-cphase", "--cutoff", "2")
        self.assertEqual(result.exit_code, 0, result.output)
        header = (self.out / "run" / "trajectory.tsv").read_text().splitlines()[0].split("\t")
        self.assertEqual(header, ["time_ns", "g,0,0", "g,0,1", "g,1,0", "g,1,1"])


class TestPresetsCommand(unittest.TestCase):
    """Test cases for rqg-presets."""

    def test_listing(self):
        result = CliRunner().invoke(presets_main, [])
        self.assertEqual(result.exit_code, 0)
        self.assertIn("paper-cphase", result.output)
        self.assertIn("paper-ccphase", result.output)

    def test_json(self):
        result = CliRunner().invoke(presets_main, ["--json"])
        self.assertEqual(result.exit_code, 0)
        names = [p["name"] for p in json.loads(result.output)]
        self.assertEqual(names, ["paper-ccphase", "paper-cphase"])


if __name__ == '__main__':
    unittest.main()
