"""End-to-end tests of the command line and the command handlers."""
import contextlib
import io
import json
import os
import sys
import tempfile
import unittest
from pathlib import Path

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from genedup import main as cli
from genedup.commands_analysis import cmd_curve, cmd_exit_time, cmd_linearize
from genedup.commands_sim import cmd_psub_scan
from genedup.config import resolve_config


def _run(*argv):
    """Run the CLI quietly; returns (exit code, stdout)."""
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main(["-q", *argv])
    return code, buf.getvalue()


class TestCli(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _manifest(self, name):
        return json.loads((self.dir / name / "manifest.json").read_text(encoding="utf-8"))

    def test_rerun_reproduces_outputs(self):
        args = ["simulate", "--model", "subfunc", "--b", "0.05", "--pop-size", "5", "--reps", "20", "--seed", "3"]
        code, out = _run(*args, "--out", str(self.dir / "a"))
        self.assertEqual(code, 0)
        summary = json.loads(out)
        self.assertEqual(sum(summary["outcomes"].values()), 20)
        self.assertAlmostEqual(summary["single_lineage_psub"], 2.0 / 9.0, places=12)
        self.assertLessEqual(summary["single_lineage_race_lower"], summary["single_lineage_race_estimate"])
        self.assertLessEqual(summary["single_lineage_race_estimate"], summary["single_lineage_race_upper"])
        self.assertEqual(_run(*args, "--out", str(self.dir / "b"))[0], 0)
        self.assertEqual(self._manifest("a")["outputs"], self._manifest("b")["outputs"])

    def test_rerun_from_manifest(self):
        code, _ = _run("curve", "--grid", "15", "--out", str(self.dir / "a"))
        self.assertEqual(code, 0)
        manifest = self.dir / "a" / "manifest.json"
        code, _ = _run("curve", "--config", str(manifest), "--out", str(self.dir / "b"))
        self.assertEqual(code, 0)
        self.assertEqual(self._manifest("a")["outputs"], self._manifest("b")["outputs"])
        self.assertEqual(self._manifest("b")["config"]["grid"], 15)

    def test_invalid_config_exit_code(self):
        self.assertEqual(_run("curve", "--mu", "2", "--out", str(self.dir / "x"))[0], 2)
        self.assertEqual(_run("simulate", "--model", "subfunc", "--out", str(self.dir / "y"))[0], 2)
        self.assertEqual(_run("theorem1", "--config", str(self.dir / "missing.json"))[0], 2)

    def test_verify_suites(self):
        for suite, grid in (("lemmas", "200"), ("curve", "200"), ("rh", "40"), ("ito", "20")):
            code, out = _run("verify", "--suite", suite, "--grid", grid, "--out", str(self.dir / suite))
            self.assertEqual(code, 0, msg=out)
            self.assertIn("PASS", out)
            self.assertTrue((self.dir / suite / "verify.csv").exists())


class TestHandlers(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def test_linearize(self):
        summary = cmd_linearize(resolve_config("linearize", None, {"grid": 20, "out": self.out}))
        self.assertEqual(summary["rows"], 20)
        self.assertEqual(summary["rh_pass_rows"], 20)
        self.assertLess(summary["max_real_eigenvalue"], 0.0)

    def test_exit_time(self):
        summary = cmd_exit_time(resolve_config("exit-time", None, {"pop_size": 1000, "out": self.out}))
        self.assertLess(abs(summary["c"] / 6.569442 - 1.0), 0.01)
        self.assertLess(abs(summary["c_exact"] / 4.820727 - 1.0), 0.01)
        self.assertIn("does not match the Ito variance", summary["variance_note"])
        self.assertIn("reference_c", summary)
        self.assertAlmostEqual(summary["generations_to_loss"], 2000.0 * summary["c"])
        self.assertLessEqual(summary["upper_limit_used"], summary["upper_limit_requested"])

    def test_subfunc_curve(self):
        summary = cmd_curve(resolve_config("curve", None, {"model": "subfunc", "grid": 25, "out": self.out}))
        self.assertEqual(summary["rows"], 25)
        self.assertLessEqual(summary["max_residual"], 1e-10)
        rows = (Path(self.out) / "curve.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(rows[0], "index,x3,y3,x,y,z,residual")
        self.assertEqual(len(rows), 26)

    def test_psub_scan_reports_race_next_to_closed_form(self):
        config = resolve_config("psub-scan", None, {"b": 0.05, "n_list": [4, 6], "reps": 400, "seed": 5, "out": self.out})
        summary = cmd_psub_scan(config)
        self.assertEqual(sorted(summary["estimates"]), ["4", "6"])
        closed = summary["single_lineage_psub"]
        self.assertAlmostEqual(closed, 2.0 / 9.0, places=12)
        self.assertLessEqual(summary["single_lineage_race_lower"], summary["single_lineage_race_estimate"])
        self.assertLessEqual(summary["single_lineage_race_estimate"], summary["single_lineage_race_upper"])
        self.assertLess(abs(summary["single_lineage_race_estimate"] - closed), 4.0 * summary["single_lineage_race_std_error"])


if __name__ == "__main__":
    unittest.main()
