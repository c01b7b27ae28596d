"""
Integration tests for the experiment harness and the command line
"""

import json
import math
import os
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from cli import EXIT_OK, EXIT_REFUSED, main
from experiment_config import ExperimentConfig, load_experiment_config
from harness import (
    MANIFEST_FILE,
    OUTCOME_FILE,
    RESULTS_FILE,
    RUN_INFO_FILE,
    RefusedConfigurationError,
    ResultTable,
    config_hash,
    example_one,
    example_three,
    example_two,
    run_experiment,
    to_json_safe,
)
from tests.test_utils import MARKOV_ALPHA_STAR, validate_results_frame

SUBCRITICAL = {
    "degree": {"family": "regular", "d": 3},
    "infectious_period": {"family": "exponential", "rate": 1.0},
    "beta": 0.2,
}


class TestResultPlumbing(unittest.TestCase):
    """JSON conversion, hashing and the files a table writes"""

    def test_to_json_safe(self):
        value = to_json_safe({
            "nan": math.nan, "inf": math.inf, "neg": -math.inf,
            "np_float": np.float64(1.5), "np_int": np.int64(3), "flag": np.bool_(True),
            "array": np.array([1.0, np.nan]), 7: (1, 2),
        })
        self.assertEqual(value, {
            "nan": None, "inf": "inf", "neg": "-inf", "np_float": 1.5, "np_int": 3,
            "flag": True, "array": [1.0, None], "7": [1, 2],
        })
        json.dumps(value)

    def test_config_hash_tracks_content(self):
        first = ExperimentConfig(kind="analyze", preset="markov-regular4")
        second = ExperimentConfig(kind="analyze", preset="markov-regular4")
        third = ExperimentConfig(kind="analyze", preset="markov-regular4", base_seed=1)
        self.assertEqual(config_hash(first), config_hash(second))
        self.assertNotEqual(config_hash(first), config_hash(third))
        self.assertEqual(len(config_hash(first)), 16)

    def test_write_creates_every_file(self):
        table = ResultTable(pd.DataFrame({"a": [1, 2]}), {"x": math.inf},
                            extras={"extra.csv": pd.DataFrame({"b": [3]})},
                            documents={"doc.json": {"y": math.nan}})
        with tempfile.TemporaryDirectory() as tmp:
            written = table.write(Path(tmp) / "nested")
            self.assertEqual(sorted(written), sorted([MANIFEST_FILE, RESULTS_FILE, RUN_INFO_FILE,
                                                      "extra.csv", "doc.json"]))
            manifest = json.loads(written[MANIFEST_FILE].read_text(encoding="utf-8"))
            self.assertEqual(manifest, {"x": "inf"})
            document = json.loads(written["doc.json"].read_text(encoding="utf-8"))
            self.assertIsNone(document["y"])
            self.assertNotIn("created_at", manifest)
            self.assertIn("created_at", json.loads(written[RUN_INFO_FILE].read_text(encoding="utf-8")))


class TestAnalyticExperiments(unittest.TestCase):
    """analyze, vaccinate-sweep and the reference examples"""

    def test_analyze_writes_summary(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = ExperimentConfig(kind="analyze", preset="markov-regular4", output_dir=tmp)
            run_experiment(config)
            summary = json.loads((Path(tmp) / "summary.json").read_text(encoding="utf-8"))
            self.assertAlmostEqual(summary["alpha_star"], MARKOV_ALPHA_STAR, places=8)
            self.assertTrue(summary["condition_14"])
            rows = pd.read_csv(Path(tmp) / RESULTS_FILE)
            valid, message = validate_results_frame(rows, ["R0", "qtilde_star", "duration_constant"])
            self.assertTrue(valid, message)
            manifest = json.loads((Path(tmp) / MANIFEST_FILE).read_text(encoding="utf-8"))
            self.assertEqual(manifest["config_hash"], config_hash(config))
            self.assertEqual(manifest["config"]["preset"], "markov-regular4")

    def test_vaccinate_sweep(self):
        config = ExperimentConfig(kind="vaccinate-sweep", preset="poisson-constant",
                                  coverages=[1.0, 0.2, 0.5, 0.75])
        rows = run_experiment(config, write=False).rows
        self.assertEqual(rows["coverage"].tolist(), [0.2, 0.5, 0.75, 1.0])
        self.assertEqual(rows["regime"].tolist(), ["subcritical", "supercritical", "supercritical",
                                                   "supercritical"])
        self.assertTrue(math.isnan(rows["c_qtilde_derivative"].iloc[0]))
        supercritical = rows[rows["regime"] == "supercritical"]
        self.assertTrue(supercritical["duration_constant"].is_monotonic_decreasing)
        self.assertTrue(supercritical["alpha_prime"].is_monotonic_increasing)
        self.assertTrue(supercritical["alpha_star"].is_monotonic_decreasing)

    def test_example_one_derivative(self):
        frame = example_one()
        np.testing.assert_allclose(frame["c_qtilde_derivative"], frame["c_qtilde_finite_difference"],
                                   atol=1e-6)
        self.assertTrue(frame["duration_decreasing"].all())
        self.assertTrue((frame["c_qtilde_derivative"] < 0).all())

    def test_example_two_approaches_uniform_mixing(self):
        frame = example_two()
        self.assertTrue(frame["qtilde_gap"].is_monotonic_decreasing)
        self.assertLess(float(frame["qtilde_gap"].iloc[-1]), 1e-3)

    def test_example_three_reference_values(self):
        frame = example_three()
        self.assertEqual(frame["coverage"].tolist(), [1.0, 0.99])
        self.assertTrue((frame["reference_gap"] <= 0.02).all())
        self.assertGreater(frame["duration_constant"].iloc[0], frame["duration_constant"].iloc[1])

    def test_examples_experiment_writes_each_table(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = ExperimentConfig(kind="examples", output_dir=tmp)
            run_experiment(config)
            for name in ("example1.csv", "example2.csv", "example3.csv", RESULTS_FILE, MANIFEST_FILE):
                self.assertTrue((Path(tmp) / name).exists(), name)


class TestSimulationExperiments(unittest.TestCase):
    """simulate, montecarlo and scaling on small populations"""

    def _montecarlo(self, **overrides):
        options = dict(kind="montecarlo", preset="markov-regular4", n=[200],
                       majors_required=3, attempt_cap=50, base_seed=5)
        options.update(overrides)
        return run_experiment(ExperimentConfig(**options), write=False)

    def test_simulate_records_events_and_tree(self):
        config = ExperimentConfig(kind="simulate", preset="cutoff-regular4", n=[300],
                                  record_events=True, record_tree=True, gamma_levels=[0.5])
        table = run_experiment(config, write=False)
        self.assertEqual(sorted(table.extras), ["events.csv", "tree.csv"])
        row = table.rows.iloc[0]
        self.assertEqual(len(table.extras["tree.csv"]), row["infections"])
        self.assertIn("T_gamma_0.5", table.rows.columns)
        self.assertLessEqual(row["T_dagger"], row["T_star"])
        for name in ("events.csv", "tree.csv"):
            frame = table.extras[name]
            self.assertTrue((frame["seed"] == config.base_seed).all(), name)
            self.assertTrue((frame["config_hash"] == config_hash(config)).all(), name)

    def test_simulate_writes_one_line_outcome(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = ExperimentConfig(kind="simulate", preset="markov-regular4", n=[200],
                                      base_seed=3, output_dir=tmp)
            run_experiment(config)
            lines = (Path(tmp) / OUTCOME_FILE).read_text(encoding="utf-8").splitlines()
            self.assertEqual(len(lines), 1)
            outcome = json.loads(lines[0])
            for key in ("seed", "config_hash", "T_star", "T_dagger", "T_lprime_literal",
                        "infections", "final_susceptible_fraction"):
                self.assertIn(key, outcome)
            self.assertEqual(outcome["seed"], 3)
            self.assertEqual(outcome["config_hash"], config_hash(config))
            self.assertEqual(outcome["config"]["preset"], "markov-regular4")
            self.assertNotIn("wall_time", outcome)
            row = pd.read_csv(Path(tmp) / RESULTS_FILE).iloc[0]
            self.assertAlmostEqual(outcome["T_dagger"], row["T_dagger"], places=9)

    def test_rerun_reproduces_manifest_and_outcome(self):
        contents = []
        with tempfile.TemporaryDirectory() as tmp:
            config = ExperimentConfig(kind="simulate", preset="cutoff-regular4", n=[200],
                                      base_seed=8, output_dir=tmp)
            for _ in range(2):
                run_experiment(config)
                contents.append(tuple((Path(tmp) / name).read_bytes()
                                      for name in (MANIFEST_FILE, OUTCOME_FILE)))
        self.assertEqual(contents[0], contents[1])

    def test_montecarlo_quota(self):
        table = self._montecarlo()
        rows = table.rows
        self.assertEqual(int(rows["major"].sum()), 3)
        self.assertTrue(bool(rows["major"].iloc[-1]))
        self.assertEqual(rows["replicate"].tolist(), list(range(len(rows))))
        self.assertEqual(rows["seed"].tolist(), [5 + i for i in range(len(rows))])
        self.assertFalse(table.manifest["partial"])

    def test_montecarlo_is_deterministic(self):
        first = self._montecarlo().rows.drop(columns="wall_time")
        second = self._montecarlo().rows.drop(columns="wall_time")
        self.assertTrue(first.equals(second))

    def test_worker_count_does_not_change_results(self):
        serial = self._montecarlo().rows.drop(columns=["wall_time", "config_hash"])
        parallel = self._montecarlo(jobs=2).rows.drop(columns=["wall_time", "config_hash"])
        pd.testing.assert_frame_equal(serial, parallel)

    def test_subcritical_montecarlo_is_partial(self):
        with self.assertLogs('harness', level='WARNING'):
            table = run_experiment(ExperimentConfig(kind="montecarlo", parameters=SUBCRITICAL, n=[200],
                                                    majors_required=5, attempt_cap=20), write=False)
        self.assertTrue(table.manifest["partial"])
        self.assertEqual(len(table.rows), 20)
        self.assertEqual(table.extras["outbreaks.csv"]["predicted_major_probability"].iloc[0], 0.0)

    def test_scaling_rows(self):
        config = ExperimentConfig(kind="scaling", preset="markov-regular3-fast", n=[100, 400],
                                  majors_required=4, attempt_cap=100, target="T_dagger")
        table = run_experiment(config, write=False)
        rows = table.rows
        self.assertEqual(rows["n"].tolist(), [100, 400])
        self.assertTrue((rows["majors"] == 4).all())
        self.assertAlmostEqual(float(rows["duration_constant"].iloc[0]), 1.0, places=8)
        self.assertTrue(math.isfinite(float(rows["slope"].iloc[0])))
        self.assertIn("replicates.csv", table.extras)
        self.assertTrue((rows["mean_gap_ratio"] >= 0).all())

    def test_scaling_refuses_T_star_when_condition_fails(self):
        config = ExperimentConfig(kind="scaling", preset="markov-regular3-fast", n=[100], target="T_star")
        with self.assertRaises(RefusedConfigurationError):
            run_experiment(config, write=False)

    def test_scaling_refuses_subcritical_models(self):
        config = ExperimentConfig(kind="scaling", parameters=SUBCRITICAL, n=[100])
        with self.assertRaises(RefusedConfigurationError):
            run_experiment(config, write=False)


class TestBranchingExperiment(unittest.TestCase):
    """Ensembles centred by the Malthusian parameter"""

    def test_early_hitting(self):
        config = ExperimentConfig(kind="branching", preset="markov-regular4", replicates=3,
                                  branching={"phase": "early", "mode": "hitting", "ks": [50, 10]})
        table = run_experiment(config, write=False)
        self.assertEqual(len(table.rows), 6)
        self.assertAlmostEqual(float(table.rows["limit"].iloc[0]), 1.0, places=8)
        self.assertEqual(table.extras["branching_summary.csv"]["k"].tolist(), [10, 50])

    def test_final_extinction(self):
        config = ExperimentConfig(kind="branching", preset="markov-regular4", replicates=2,
                                  branching={"phase": "final", "mode": "extinction", "ks": [1, 10]})
        table = run_experiment(config, write=False)
        self.assertAlmostEqual(float(table.rows["limit"].iloc[0]), 1.0 / abs(MARKOV_ALPHA_STAR), places=7)
        self.assertEqual(table.manifest["law"], "final")


class TestCommandLine(unittest.TestCase):
    """Exit codes and files of `python -m epinet`"""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def _config(self, payload) -> str:
        path = self.tmp / "config.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)

    def test_analyze_bare_parameter_set(self):
        config = self._config({"degree": {"family": "regular", "d": 4},
                               "infectious_period": {"family": "exponential", "rate": 1.0}, "beta": 1.0})
        out = self.tmp / "analyze"
        self.assertEqual(main(["analyze", "--config", config, "--out", str(out)]), EXIT_OK)
        self.assertTrue((out / "summary.json").exists())
        self.assertTrue((out / RESULTS_FILE).exists())

    def test_seed_override(self):
        config = load_experiment_config(self._config({"preset": "markov-regular4", "base_seed": 3}),
                                        "montecarlo", seed=11)
        self.assertEqual(config.base_seed, 11)
        self.assertEqual(config.replicate_seed(2), 13)

    def test_invalid_population_size(self):
        config = self._config({"preset": "markov-regular4", "n": [1]})
        self.assertEqual(main(["montecarlo", "--config", config, "--out", str(self.tmp)]), EXIT_REFUSED)

    def test_unknown_preset(self):
        config = self._config({"preset": "no-such-model"})
        self.assertEqual(main(["analyze", "--config", config, "--out", str(self.tmp)]), EXIT_REFUSED)

    def test_missing_config_file(self):
        missing = str(self.tmp / "missing.json")
        self.assertEqual(main(["analyze", "--config", missing, "--out", str(self.tmp)]), EXIT_REFUSED)

    def test_refused_T_star_scaling(self):
        config = self._config({"preset": "markov-regular3-fast", "n": [100], "target": "T_star"})
        self.assertEqual(main(["scaling", "--config", config, "--out", str(self.tmp)]), EXIT_REFUSED)
        self.assertFalse((self.tmp / RESULTS_FILE).exists())


if __name__ == '__main__':
    unittest.main()
