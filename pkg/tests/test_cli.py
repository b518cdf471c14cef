import unittest
import sys, os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import io
import json
import time
import logging
import tempfile
import contextlib

import numpy as np
import pandas as pd

from phylodyn_ps.cli import main, parse_interval, parse_intervals, parse_names, MODEL_NAMES
from phylodyn_ps.config import load_config
from phylodyn_ps import PosteriorSummary, SampleSchedule, build_grid, serialize_newick, simulate_coalescent
from phylodyn_ps.genealogy import write_sidecar
from phylodyn_ps.metrics import emrw
from phylodyn_ps.simulator import seasonal_trajectory, simulated_tip_times

logger = logging.getLogger(__name__)

def run(*argv: str) -> tuple[int, str, str]:
    """Runs the command line, returning (exit status, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            status = main(list(argv))
        except SystemExit as e:
            status = e.code
    return status, out.getvalue(), err.getvalue()

def read(path: str) -> str:
    with open(path) as fp:
        return fp.read()

class Arguments_TestCase(unittest.TestCase):

    def test_parse_interval(self) -> None:
        self.assertEqual(parse_interval("0:48"), (0.0, 48.0))
        self.assertEqual(parse_intervals("0:6,6:48"), [(0.0, 6.0), (6.0, 48.0)])
        self.assertEqual(parse_names(MODEL_NAMES)("bnpr, bnpr-ps"), ["bnpr", "bnpr-ps"])

    def test_usage_errors(self) -> None:
        with tempfile.TemporaryDirectory() as directory:
            cases = [
                (),
                ("infer", "--out", directory),
                ("simulate", "--window", "5:1", "--out", directory),
                ("simulate", "--unknown-flag", "--out", directory),
                ("study", "--models", "bnpr,skyline", "--out", directory),
                ("metrics", "--out", directory),
            ]
            for argv in cases:
                with self.subTest(argv = argv):
                    status, _, err = run(*argv)
                    self.assertEqual(status, 2)
                    self.assertIn("usage", err)

class RuntimeErrors_TestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.directory = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.directory.name, "out")

    def tearDown(self) -> None:
        self.directory.cleanup()

    def write(self, name: str, text: str) -> str:
        path = os.path.join(self.directory.name, name)
        with open(path, "w") as fp:
            fp.write(text)
        return path

    def test_missing_tree(self) -> None:
        status, _, err = run("infer", "--tree", os.path.join(self.directory.name, "missing.nwk"), "--out", self.out, "--quiet")
        self.assertEqual(status, 1)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["error"], "FileNotFoundError")

    def test_malformed_newick(self) -> None:
        tree = self.write("bad.nwk", "((A:1,B:1):1,C:2;")
        status, _, err = run("infer", "--tree", tree, "--out", self.out, "--quiet")
        self.assertEqual(status, 1)
        payload = json.loads(err.strip().splitlines()[-1])
        self.assertEqual(payload["error"], "NewickParseError")
        self.assertIn("offset", payload["detail"])

    def test_invalid_genealogy(self) -> None:
        tree = self.write("tied.nwk", "((A:1,B:1):1,(C:1,D:1):1);")
        status, _, err = run("infer", "--tree", tree, "--out", self.out, "--quiet")
        self.assertEqual(status, 1)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["error"], "GenealogyError")

    def test_unknown_config_key(self) -> None:
        config = self.write("config.json", json.dumps({"n": 10, "colour": "blue"}))
        status, _, err = run("simulate", "--config", config, "--out", self.out, "--quiet")
        self.assertEqual(status, 1)
        self.assertEqual(json.loads(err.strip())["error"], "ConfigError")

    def test_metrics_on_missing_columns(self) -> None:
        table = self.write("table.csv", "time,median\n0.5,1\n1.5,2\n")
        status, _, err = run("metrics", "--trajectories", table, "--out", self.out, "--quiet")
        self.assertEqual(status, 1)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["error"], "ValueError")

class Config_TestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.directory = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.directory.name, "out")

    def tearDown(self) -> None:
        self.directory.cleanup()

    def write(self, name: str, text: str) -> str:
        path = os.path.join(self.directory.name, name)
        with open(path, "w") as fp:
            fp.write(text)
        return path

    def trajectory(self, name: str, shift: float) -> str:
        rows = [f"{t + 0.5},{10 + shift},{5 + shift},{20 + shift}" for t in range(12)]
        return self.write(name, "time,median,q025,q975\n" + "\n".join(rows) + "\n")

    def test_load_config_lists(self) -> None:
        config = self.write("config.json", json.dumps({"trajectories": ["a.csv", "b.csv"], "window": [0, 12], "schedules": ["uniform", "bm"]}))
        values = load_config(config, multi_valued = {"trajectories"})
        self.assertEqual(values["trajectories"], ["a.csv", "b.csv"])
        self.assertEqual(values["window"], "0:12")
        self.assertEqual(values["schedules"], "uniform,bm")
        single = self.write("single.json", json.dumps({"trajectories": "a.csv"}))
        self.assertEqual(load_config(single, multi_valued = {"trajectories"})["trajectories"], ["a.csv"])

    def test_metrics_trajectories_from_config(self) -> None:
        first, second = self.trajectory("first.csv", 0), self.trajectory("second.csv", 1)
        config = self.write("config.json", json.dumps({"trajectories": [first, second], "intervals": "0:12"}))
        status, stdout, err = run("metrics", "--config", config, "--out", self.out, "--quiet")
        self.assertEqual(status, 0, err)
        self.assertIn("Metrics saved", stdout)
        emrw = pd.read_csv(os.path.join(self.out, "emrw.csv"))
        self.assertEqual(list(emrw["interval"]), ["(0,12)"])
        self.assertEqual(json.loads(read(os.path.join(self.out, "manifest.json")))["parameters"]["trajectories"], [first, second])

    def test_metrics_flag_overrides_config_list(self) -> None:
        first, second = self.trajectory("first.csv", 0), self.trajectory("second.csv", 1)
        config = self.write("config.json", json.dumps({"trajectories": [first, second]}))
        status, _, err = run("metrics", "--config", config, "--trajectories", first, "--out", self.out, "--quiet")
        self.assertEqual(status, 0, err)
        self.assertEqual(json.loads(read(os.path.join(self.out, "manifest.json")))["parameters"]["outcome"]["datasets"], 1)

class Pipeline_TestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls) -> None:
        cls.directory = tempfile.TemporaryDirectory()
        cls.simulated = os.path.join(cls.directory.name, "sim")
        cls.status, cls.stdout, _ = run(
            "simulate", "--schedule", "proportional", "--n", "40", "--window", "0:12",
            "--fixed-count", "--seed", "3", "--out", cls.simulated, "--quiet",
        )

    @classmethod
    def tearDownClass(cls) -> None:
        cls.directory.cleanup()

    def path(self, *parts: str) -> str:
        return os.path.join(self.directory.name, *parts)

    def test_simulate(self) -> None:
        self.assertEqual(self.status, 0)
        self.assertIn("Genealogy of 40 tips saved", self.stdout)
        for name in ("tree.nwk", "tips.tsv", "truth.csv", "manifest.json"):
            self.assertTrue(os.path.exists(self.path("sim", name)), name)
        manifest = json.loads(read(self.path("sim", "manifest.json")))
        self.assertEqual(manifest["command"], "simulate")
        self.assertEqual(manifest["seed"], 3)
        self.assertEqual(manifest["parameters"]["window"], [0.0, 12.0])
        self.assertEqual(manifest["parameters"]["outcome"]["tips"], 40)

    def test_simulate_is_reproducible(self) -> None:
        again = self.path("sim_again")
        status, _, _ = run(
            "simulate", "--schedule", "proportional", "--n", "40", "--window", "0:12",
            "--fixed-count", "--seed", "3", "--out", again, "--quiet",
        )
        self.assertEqual(status, 0)
        for name in ("tree.nwk", "tips.tsv", "truth.csv"):
            self.assertEqual(read(os.path.join(again, name)), read(self.path("sim", name)), name)

    def test_config_values_and_flag_precedence(self) -> None:
        config = self.path("config.json")
        with open(config, "w") as fp:
            json.dump({"n": 25, "window": [0, 12], "fixed-count": True, "schedule": "uniform"}, fp)
        out = self.path("configured")
        status, stdout, _ = run("simulate", "--config", config, "--n", "30", "--out", out, "--quiet")
        self.assertEqual(status, 0)
        self.assertIn("Genealogy of 30 tips saved", stdout)
        parameters = json.loads(read(os.path.join(out, "manifest.json")))["parameters"]
        self.assertEqual(parameters["schedule"], "uniform")
        self.assertEqual(parameters["window"], [0.0, 12.0])

    def test_infer_then_metrics(self) -> None:
        inferred = {}
        for model in ("bnpr", "bnpr-ps"):
            out = self.path(f"post_{model}")
            status, stdout, err = run(
                "infer", "--model", model, "--tree", self.path("sim", "tree.nwk"), "--sidecar", self.path("sim", "tips.tsv"),
                "--s0", "12", "--grid", "20", "--out", out, "--quiet",
            )
            self.assertEqual(status, 0, err)
            self.assertIn("Summary saved", stdout)
            trajectory = pd.read_csv(os.path.join(out, "trajectory.csv"))
            self.assertEqual(list(trajectory.columns), ["time", "median", "q025", "q975"])
            self.assertEqual(len(trajectory), 20)
            self.assertTrue(((trajectory["q025"] <= trajectory["median"]) & (trajectory["median"] <= trajectory["q975"])).all())
            summary = json.loads(read(os.path.join(out, "summary.json")))
            self.assertEqual(summary["kind"], model)
            self.assertIn("tau", summary)
            intervals = pd.read_csv(os.path.join(out, "intervals.csv"))
            self.assertEqual(intervals["d"].sum(), 39)
            inferred[model] = os.path.join(out, "trajectory.csv")
        self.assertIn("beta1", json.loads(read(self.path("post_bnpr-ps", "summary.json"))))

        out = self.path("metrics")
        status, _, err = run(
            "metrics", "--trajectories", inferred["bnpr"], inferred["bnpr-ps"],
            "--intervals", "0:12,0:1000", "--period", "12", "--out", out, "--quiet",
        )
        self.assertEqual(status, 0, err)
        emrw = pd.read_csv(os.path.join(out, "emrw.csv"))
        self.assertEqual(list(emrw["interval"]), ["(0,12)", "(0,1000)"])
        self.assertTrue((emrw["emrw"] >= 0).all())
        seasonal = pd.read_csv(os.path.join(out, "seasonal.csv"))
        self.assertEqual(set(seasonal["source"]), set(inferred.values()))
        self.assertTrue(os.path.exists(os.path.join(out, "pointwise_emrw.csv")))

class Study_TestCase(unittest.TestCase):

    def test_small_study(self) -> None:
        with tempfile.TemporaryDirectory() as directory:
            status, stdout, err = run(
                "study", "--replicates", "2", "--n", "30", "--schedules", "uniform", "--models", "bnpr",
                "--intervals", "0:6,6:12", "--window", "0:12", "--grid", "10", "--eval-points", "24",
                "--seed", "5", "--out", directory, "--quiet",
            )
            self.assertEqual(status, 0, err)
            self.assertIn("Study table saved", stdout)
            table = pd.read_csv(os.path.join(directory, "study.csv"))
            self.assertEqual(list(table.columns), ["schedule", "model", "interval", "MRD", "MRW", "ME"])
            self.assertEqual(len(table), 2)
            self.assertTrue(table["ME"].between(0, 1).all())
            pointwise = pd.read_csv(os.path.join(directory, "pointwise.csv"))
            self.assertEqual(len(pointwise), 25)
            self.assertFalse(os.path.exists(os.path.join(directory, "beta1.json")))
            manifest = json.loads(read(os.path.join(directory, "manifest.json")))
            self.assertEqual(manifest["parameters"]["outcome"]["replicates"], 2)

@unittest.skipUnless(os.environ.get("PHYLODYN_SLOW") == "1", "set PHYLODYN_SLOW=1 to time the full-size reconstruction")
class Timing_TestCase(unittest.TestCase):
    """Clustered sampling: 30 tips at each of t = 0, 1, 2, 5, 10 under the seasonal trajectory."""

    def test_infer_both_models_on_clustered_sample(self) -> None:
        truth = seasonal_trajectory(2.0, 0.0, build_grid(0, 120, 1200))
        samples = SampleSchedule(np.array([0.0, 1.0, 2.0, 5.0, 10.0]), np.full(5, 30))
        gen = simulate_coalescent(samples, truth, seed = 13, s0 = 10.0)
        with tempfile.TemporaryDirectory() as directory:
            tree, sidecar = os.path.join(directory, "tree.nwk"), os.path.join(directory, "tips.tsv")
            with open(tree, "w") as fp:
                fp.write(serialize_newick(gen.tree) + "\n")
            write_sidecar(sidecar, simulated_tip_times(gen))

            widths = {}
            for model in ("bnpr", "bnpr-ps"):
                out = os.path.join(directory, model)
                started = time.perf_counter()
                status, _, err = run("infer", "--model", model, "--tree", tree, "--sidecar", sidecar, "--s0", "10", "--grid", "100", "--out", out, "--quiet")
                elapsed = time.perf_counter() - started
                self.assertEqual(status, 0, err)
                self.assertLess(elapsed, 10.0, model)
                summary = PosteriorSummary.from_frame(pd.read_csv(os.path.join(out, "trajectory.csv")))
                widths[model] = emrw([summary], 0.0, 10.0)
            logger.info(f"EMRW on (0, 10): bnpr {widths['bnpr']:.3f}, bnpr-ps {widths['bnpr-ps']:.3f}")

if __name__ == '__main__':
    unittest.main()
