import json
import os
import tempfile
import unittest as ut
import pytest

import yaml

from ioduality.config import RunConfig
from ioduality.config import build_config
from ioduality.config import load_config
from ioduality.config import parse_flat_config
from ioduality.exceptions import ConfigError
from ioduality.exceptions import OverlapError

FLAT_CONFIG = """
# unit disk, Dirichlet
geometry.obstacle.shape = circle
geometry.obstacle.radius = 1.0
geometry.source.center = [2.0, 0.0]
problem.kind = dirichlet
sweep.interval = [2, 16]
sweep.step = 0.02
phase.delta_rel = 1e-6
validate.lam = 4.0
run.parallelism = 2
"""


class TestFlatParsing(ut.TestCase):
    def test_values(self):
        data = parse_flat_config(FLAT_CONFIG)
        self.assertEqual(data["geometry.obstacle.shape"], "circle")
        self.assertEqual(data["sweep.interval"], [2, 16])
        self.assertEqual(data["phase.delta_rel"], 1e-6)
        self.assertIsInstance(data["phase.delta_rel"], float)
        self.assertEqual(len(data), 9)

    def test_malformed(self):
        with self.assertRaises(ConfigError):
            parse_flat_config("sweep.step 0.02")
        with self.assertRaises(ConfigError):
            parse_flat_config("sweep..step = 0.02")
        with self.assertRaises(ConfigError) as cm:
            parse_flat_config("sweep.step = 0.02\nsweep.step = 0.01")
        self.assertIn("duplicate", str(cm.exception))


class TestRunConfig(ut.TestCase):
    def test_build(self):
        config = build_config(parse_flat_config(FLAT_CONFIG))
        self.assertEqual(config.sweep.interval, (2.0, 16.0))
        self.assertEqual(config.validate_.lam, 4.0)
        self.assertEqual(config.run.parallelism, 2)
        self.assertEqual(config.scattering_problem().sigma, 1)
        self.assertTrue(config.scene().is_disk)
        self.assertEqual(config.flat()["validate.lam"], 4.0)

    def test_defaults(self):
        config = RunConfig()
        self.assertEqual(config.discretization.n_source, 64)
        self.assertEqual(config.thresholds.tau_dip, 0.2)
        self.assertEqual(config.thresholds.tau_jump, 0.75)
        self.assertEqual(config.synthesis.presumed_region_radius, 1.2)
        self.assertEqual(config.synthesis.presumed_region_center, (0.0, 0.0))
        self.assertEqual(config.synthesis.alphas, [1e-2, 1e-4, 1e-6, 1e-8, 1e-10])

    def test_errors_name_the_field(self):
        with self.assertRaises(ConfigError) as cm:
            build_config({"geometry.obstacle.radius": -1.0})
        self.assertIn("geometry.obstacle.radius", str(cm.exception))
        with self.assertRaises(ConfigError) as cm:
            build_config({"problem.kind": "transmission"})
        self.assertIn("problem.n", str(cm.exception))
        with self.assertRaises(ConfigError) as cm:
            build_config({"sweep.stride": 0.1})
        self.assertIn("sweep.stride", str(cm.exception))
        with self.assertRaises(ConfigError):
            build_config({"discretization.n_source": 63})
        with self.assertRaises(ConfigError):
            build_config({"sweep.interval": [16, 2]})

    def test_hash(self):
        config = build_config(parse_flat_config(FLAT_CONFIG))
        self.assertEqual(len(config.config_hash), 64)
        moved = config.with_overrides(**{"run.parallelism": 1, "run.out": "elsewhere"})
        self.assertEqual(moved.config_hash, config.config_hash)
        finer = config.with_overrides(**{"sweep.step": 0.01})
        self.assertNotEqual(finer.config_hash, config.config_hash)
        self.assertNotIn("run.parallelism", config.canonical_text())

    def test_overlap(self):
        config = RunConfig().with_overrides(**{"geometry.source.center": [1.1, 0.0]})
        with self.assertRaises(OverlapError):
            config.scene()


@pytest.mark.parametrize("suffix", [".conf", ".yaml", ".json"])
def test_load_config(suffix):
    nested = {"problem": {"kind": "transmission", "n": 4}, "sweep": {"step": 0.05}}
    if suffix == ".yaml":
        text = yaml.safe_dump(nested)
    elif suffix == ".json":
        text = json.dumps(nested)
    else:
        text = "problem.kind = transmission\nproblem.n = 4\nsweep.step = 0.05\n"
    with tempfile.TemporaryDirectory() as tmpdir:
        path = os.path.join(tmpdir, f"run{suffix}")
        with open(path, "w") as OUT:
            OUT.write(text)
        config = load_config(path, **{"run.parallelism": 3})
    assert config.problem.n == 4
    assert config.sweep.step == 0.05
    assert config.run.parallelism == 3
    assert config.scattering_problem().sigma == -1


def test_missing_config():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/ioduality.conf")


CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIG_DIR)))
def test_shipped_configs(name):
    config = load_config(os.path.join(CONFIG_DIR, name))
    assert config.scene().separation > 0
