import logging
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import yaml

from config.logging import JsonFormatter, resolve_level, setup_logging
from config.settings import ConfigError, load_settings, parse_override


class TestLoadSettings(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        env = patch.dict(os.environ, {}, clear=False)
        env.start()
        self.addCleanup(env.stop)
        for name in ("CVEGAN_SEED", "CVEGAN_OUT_DIR", "CVEGAN_DEVICE", "CVEGAN_WORKERS"):
            os.environ.pop(name, None)

    def _write(self, data) -> str:
        path = Path(self.tmp.name) / "config.yaml"
        path.write_text(yaml.safe_dump(data))
        return str(path)

    def test_defaults(self):
        settings = load_settings()
        self.assertEqual(settings.seed, 0)
        self.assertEqual(settings.net.width, 64)
        self.assertEqual(settings.train.lr0, 1e-4)
        self.assertEqual(settings.resphere.num_moments, 3)
        self.assertEqual(settings.codec.mode, "builtin-stub")
        self.assertEqual(settings.calibration.polarity, "mos")

    def test_file_overrides_and_flags(self):
        path = self._write({
            "seed": 3,
            "net": {"width": 32, "ecbam_reduction": 8},
            "codec": {"qps": [22, 37]},
            "evaluation": {"sequences": [{"name": "s", "width": 96, "height": 96, "synthetic_seed": 1}]},
        })
        settings = load_settings(path, ["train.epochs=5", "resphere.adv_weight=0.01"], out_dir="runs")
        self.assertEqual(settings.seed, 3)
        self.assertEqual(settings.net.seed, 3)
        self.assertEqual(settings.train.seed, 3)
        self.assertEqual(settings.net.width, 32)
        self.assertEqual(settings.codec.qps, (22, 37))
        self.assertEqual(settings.train.epochs, 5)
        self.assertEqual(settings.resphere.adv_weight, 0.01)
        self.assertEqual(settings.out_dir, "runs")
        self.assertEqual(settings.evaluation.sequences[0]["name"], "s")
        self.assertEqual(load_settings(path, seed=9).seed, 9)

    def test_discriminator_feature_dim_follows_net(self):
        settings = load_settings(overrides=["net.feature_dim=16"])
        self.assertEqual(settings.resphere.feature_dim, 16)
        settings = load_settings(overrides=["net.feature_dim=16", "resphere.feature_dim=32"])
        self.assertEqual(settings.resphere.feature_dim, 32)

    def test_per_qp_checkpoints(self):
        settings = load_settings(overrides=['evaluation.checkpoints={22: a.pt, "37": b.pt}'])
        self.assertEqual(settings.evaluation.checkpoints, {22: "a.pt", 37: "b.pt"})
        self.assertEqual(load_settings().evaluation.checkpoints, {})
        with self.assertRaises(ConfigError):
            load_settings(overrides=["evaluation.checkpoints={low: a.pt}"])
        with self.assertRaises(ConfigError):
            load_settings(overrides=["evaluation.checkpoints=a.pt"])

    def test_calibration_feature_settings(self):
        settings = load_settings()
        self.assertEqual(settings.calibration.extractor, "random")
        self.assertEqual(settings.calibration.feature_normalizer, 1.0)
        settings = load_settings(overrides=["calibration.extractor=vgg19", "calibration.pretrained=false"])
        self.assertEqual(settings.calibration.extractor, "vgg19")
        self.assertFalse(settings.calibration.pretrained)
        with self.assertRaises(ConfigError):
            load_settings(overrides=["calibration.extractor=alexnet"])
        with self.assertRaises(ConfigError):
            load_settings(overrides=["calibration.feature_normalizer=0"])

    def test_environment_layer(self):
        with patch.dict(os.environ, {"CVEGAN_SEED": "7", "CVEGAN_WORKERS": "4", "CVEGAN_DEVICE": "cpu"}):
            settings = load_settings()
        self.assertEqual(settings.seed, 7)
        self.assertEqual(settings.calibration.workers, 4)
        self.assertEqual(settings.evaluation.workers, 4)
        with patch.dict(os.environ, {"CVEGAN_SEED": "seven"}):
            with self.assertRaises(ConfigError):
                load_settings()

    def test_file_wins_over_environment(self):
        path = self._write({"seed": 2})
        with patch.dict(os.environ, {"CVEGAN_SEED": "7"}):
            self.assertEqual(load_settings(path).seed, 2)

    def test_rejects_unknown_sections_keys_and_values(self):
        with self.assertRaises(ConfigError):
            load_settings(self._write({"optimizer": {"lr": 1}}))
        with self.assertRaises(ConfigError):
            load_settings(self._write({"train": {"momentum": 0.9}}))
        with self.assertRaises(ConfigError):
            load_settings(self._write({"train": {"decay_mode": "cosine"}}))
        with self.assertRaises(ConfigError):
            load_settings(self._write({"train": 3}))
        with self.assertRaises(ConfigError):
            load_settings(str(Path(self.tmp.name) / "missing.yaml"))
        with self.assertRaises(ConfigError):
            load_settings(overrides=["seed=abc"])

    def test_rejects_non_mapping_files(self):
        path = Path(self.tmp.name) / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with self.assertRaises(ConfigError):
            load_settings(str(path))

    def test_parse_override(self):
        self.assertEqual(parse_override("train.epochs=10"), (["train", "epochs"], 10))
        self.assertEqual(parse_override("out_dir=runs/a"), (["out_dir"], "runs/a"))
        self.assertEqual(parse_override("codec.qps=[22, 27]"), (["codec", "qps"], [22, 27]))
        with self.assertRaises(ConfigError):
            parse_override("train.epochs")
        with self.assertRaises(ConfigError):
            parse_override("a.b.c=1")


class TestLogging(unittest.TestCase):

    def tearDown(self):
        for handler in list(logging.getLogger().handlers):
            handler.close()
        logging.getLogger().handlers.clear()

    def test_resolve_level(self):
        self.assertEqual(resolve_level("debug"), logging.DEBUG)
        self.assertEqual(resolve_level(None), logging.INFO)
        self.assertEqual(resolve_level("chatty"), logging.INFO)

    def test_setup_creates_rotating_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            logs = setup_logging(log_dir=tmp, level="WARNING")
            logging.getLogger("cvegan.test").error("disk full")
            for handler in logging.getLogger().handlers:
                handler.flush()
            self.assertIn("disk full", (logs / "cvegan-errors.log").read_text())
            self.assertTrue((logs / "cvegan.log").is_file())
            self.assertEqual(len(logging.getLogger().handlers), 3)
            self.tearDown()

    def test_json_format(self):
        record = logging.LogRecord("cvegan", logging.INFO, __file__, 1, "hello %s", ("there",), None)
        line = JsonFormatter().format(record)
        self.assertIn('"message": "hello there"', line)
        self.assertIn('"level": "INFO"', line)
