import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pytest
import torch

from losscal.combined import PERCEPTUAL_SPEC, CombinedLoss, combined_loss, perceptual_loss_lp
from losscal.records import (
    load_databases, read_records_csv, read_video_listing, sequence_loss_vector, write_calibration,
    write_records_csv,
)
from losscal.search import (
    MixedTransformError, cross_validate, evaluate_spec, finalize, grid_search, run_grid_search,
    single_loss_baselines, weight_grid,
)
from losscal.transforms import Transform, apply_numpy, apply_torch, transform_apply
from metrics.features import IdentityExtractor
from metrics.quality import measure_loss_vector
from models import LossSpec, LossVector, QualityRecord
from videopipe.codec import stub_encode_decode
from videopipe.synthetic import synthetic_sequence
from videopipe.yuv_io import write_yuv


INV_E = math.exp(-1.0)


def _msssim_database(seed, count=12):
    """Scores are 1 - msssim_loss; the other losses are independent noise."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(count):
        losses = rng.uniform(0.05, 0.95, 6)
        records.append(QualityRecord(f"s{seed}_{i}", LossVector.from_sequence(losses), 1.0 - losses[5]))
    return records


def _l1_database(seed, mapping, count=12):
    """Scores are a decreasing map of l1; ms-ssim loss is constant."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(count):
        losses = rng.uniform(0.05, 0.95, 6)
        losses[5] = 0.3
        records.append(QualityRecord(f"l{seed}_{i}", LossVector.from_sequence(losses), mapping(losses[0])))
    return records


class TestTransforms(unittest.TestCase):
    def test_scalar_examples(self):
        self.assertEqual(transform_apply("ln", 1.0), 0.0)
        self.assertAlmostEqual(transform_apply("identity", 0.37), 0.37)
        self.assertAlmostEqual(transform_apply("ln", INV_E), -1.0, places=12)
        self.assertAlmostEqual(transform_apply("ln", 0.0), math.log(1e-8), places=9)
        self.assertAlmostEqual(transform_apply("expm1", 1.0), 1.0, places=12)
        self.assertAlmostEqual(transform_apply("sin", 1.0), 1.0, places=12)

    def test_unknown_transform(self):
        with self.assertRaises(ValueError):
            transform_apply("cube", 0.5)

    def test_every_transform_increasing(self):
        grid = np.linspace(0.01, 0.99, 50)
        for transform in Transform:
            values = apply_numpy(transform, grid)
            self.assertTrue(np.all(np.diff(values) > 0), transform.value)

    def test_torch_matches_numpy(self):
        values = torch.linspace(0.05, 0.95, 11, dtype=torch.float64)
        for transform in Transform:
            np.testing.assert_allclose(
                apply_torch(transform, values).numpy(), apply_numpy(transform, values.numpy()), atol=1e-12
            )


class TestCombinedLoss(unittest.TestCase):
    def test_examples(self):
        lv = LossVector(0.5, 0.5, 0.5, 0.5, 0.5, INV_E)
        self.assertAlmostEqual(combined_loss(LossSpec("ln", (0, 0, 0, 0, 0, 1)), lv), -1.0, places=12)
        lv = LossVector(0.2, 0.9, 0.9, 0.9, 0.9, 0.9)
        self.assertAlmostEqual(combined_loss(LossSpec("identity", (1, 0, 0, 0, 0, 0)), lv), 0.2, places=12)
        lv = LossVector(*([INV_E] * 6))
        self.assertAlmostEqual(combined_loss(PERCEPTUAL_SPEC, lv), -1.0, places=12)

    def test_perceptual_identical_blocks_hit_floor(self):
        a = torch.rand(2, 3, 96, 96, generator=torch.Generator().manual_seed(0))
        self.assertAlmostEqual(float(perceptual_loss_lp(a, a)), math.log(1e-8), places=4)

    def test_perceptual_equals_composition(self):
        gen = torch.Generator().manual_seed(1)
        a = torch.rand(1, 3, 96, 96, generator=gen, dtype=torch.float64)
        b = torch.clamp(a + 0.1 * torch.randn(1, 3, 96, 96, generator=gen, dtype=torch.float64), 0, 1)
        expected = combined_loss(PERCEPTUAL_SPEC, measure_loss_vector(a, b))
        self.assertAlmostEqual(float(perceptual_loss_lp(a, b)), expected, delta=1e-9)

    def test_perceptual_decreases_as_distortion_shrinks(self):
        gen = torch.Generator().manual_seed(2)
        a = torch.rand(1, 3, 96, 96, generator=gen, dtype=torch.float64) * 0.5 + 0.25
        noise = torch.randn(1, 3, 96, 96, generator=gen, dtype=torch.float64)
        values = [float(perceptual_loss_lp(a, a + t * noise * 0.25)) for t in (0.8, 0.4, 0.2, 0.1)]
        self.assertTrue(all(later < earlier for earlier, later in zip(values, values[1:])), values)
        self.assertLess(float(perceptual_loss_lp(a, a)), values[-1])

    def test_module_is_differentiable(self):
        gen = torch.Generator().manual_seed(3)
        target = torch.rand(1, 3, 96, 96, generator=gen)
        output = torch.rand(1, 3, 96, 96, generator=gen).requires_grad_(True)
        CombinedLoss(LossSpec("sqrt", (0.2, 0.2, 0.2, 0.0, 0.2, 0.2)))(output, target).backward()
        self.assertTrue(torch.isfinite(output.grad).all())
        self.assertGreater(float(output.grad.abs().sum()), 0.0)


class TestGridSearch(unittest.TestCase):
    def test_weight_grid_shape_and_order(self):
        grid = weight_grid(0.1)
        self.assertEqual(grid.shape, (161051, 6))
        self.assertTrue(np.all(grid[:, 5] == 1.0))
        np.testing.assert_array_equal(grid[0], [0, 0, 0, 0, 0, 1])
        np.testing.assert_allclose(grid[1], [0, 0, 0, 0, 0.1, 1])
        with self.assertRaises(ValueError):
            weight_grid(0.3)

    def test_recovers_msssim_indicator(self):
        databases = [_msssim_database(0), _msssim_database(1)]
        outcome = run_grid_search(databases, step=0.25)
        self.assertEqual(outcome.spec.weights, (0.0, 0.0, 0.0, 0.0, 0.0, 1.0))
        self.assertEqual(outcome.srocc, 1.0)
        # every transform reaches 1.0 here; the lexicographically smallest id wins
        self.assertEqual(outcome.spec.transform_id, "arcsin")

    def test_dmos_polarity(self):
        rng = np.random.default_rng(4)
        records = []
        for i in range(10):
            losses = rng.uniform(0.05, 0.95, 6)
            records.append(QualityRecord(str(i), LossVector.from_sequence(losses), 10.0 * losses[5]))
        spec = grid_search({"dmos": records, "copy": list(records)}, step=0.5, transforms=["ln"], polarity="dmos")
        self.assertEqual(spec, LossSpec("ln", (0, 0, 0, 0, 0, 1)))

    def test_l1_dominant_from_different_monotone_maps(self):
        databases = {
            "linear": _l1_database(5, lambda v: 1.0 - v),
            "exponential": _l1_database(6, lambda v: math.exp(-3.0 * v)),
        }
        outcome = run_grid_search(databases, step=0.1, transforms=["ln", "identity"])
        self.assertEqual(outcome.spec.weights, (0.1, 0.0, 0.0, 0.0, 0.0, 1.0))
        self.assertEqual(outcome.srocc, 1.0)

    def test_single_record_database_rejected(self):
        with self.assertRaises(ValueError):
            grid_search([_msssim_database(0, count=1)], step=0.5)
        with self.assertRaises(ValueError):
            grid_search([], step=0.5)

    def test_deterministic_and_worker_independent(self):
        databases = [_msssim_database(7), _l1_database(8, lambda v: 1 - v)]
        serial = run_grid_search(databases, step=0.25)
        parallel = run_grid_search(databases, step=0.25, workers=3)
        self.assertEqual(serial, parallel)
        self.assertEqual(serial, run_grid_search(databases, step=0.25))

    def test_rescaled_weights_same_srocc(self):
        databases = [_msssim_database(9), _msssim_database(10)]
        spec = LossSpec("identity", (0.2, 0.1, 0.0, 0.3, 0.0, 0.4))
        doubled = LossSpec("identity", tuple(2 * w for w in spec.weights))
        self.assertAlmostEqual(evaluate_spec(spec, databases), evaluate_spec(doubled, databases), places=12)

    def test_single_loss_baselines(self):
        baselines = single_loss_baselines([_msssim_database(11), _msssim_database(12)])
        self.assertAlmostEqual(baselines["msssim_loss"], 1.0, places=12)
        self.assertEqual(len(baselines), 6)


class TestFinalize(unittest.TestCase):
    def test_equal_splits_normalize(self):
        spec = LossSpec("ln", (0.6, 0.2, 0, 0, 0.4, 0.8))
        final = finalize([spec] * 8)
        np.testing.assert_allclose(final.weights, (0.3, 0.1, 0, 0, 0.2, 0.4), atol=1e-12)
        self.assertAlmostEqual(final.weight_sum, 1.0, delta=1e-9)

    def test_single_normalized_split_unchanged(self):
        spec = LossSpec("ln", (0.3, 0.1, 0, 0, 0.2, 0.4))
        np.testing.assert_allclose(finalize([spec]).weights, spec.weights, atol=1e-12)

    def test_median_then_normalize(self):
        specs = [
            LossSpec("ln", (0.2, 0.4, 0.0, 0.0, 0.0, 1.0)),
            LossSpec("ln", (0.6, 0.0, 0.1, 0.0, 0.0, 1.0)),
            LossSpec("ln", (0.4, 0.2, 0.3, 0.0, 0.0, 1.0)),
        ]
        expected = np.array([0.4, 0.2, 0.1, 0.0, 0.0, 1.0]) / 1.7
        final = finalize(specs)
        np.testing.assert_allclose(final.weights, expected, atol=1e-12)
        self.assertEqual(final.weights[3], 0.0)

    def test_mixed_transforms_rejected(self):
        with self.assertRaises(MixedTransformError):
            finalize([LossSpec("ln", (0, 0, 0, 0, 0, 1)), LossSpec("sqrt", (0, 0, 0, 0, 0, 1))])


class TestCrossValidate(unittest.TestCase):
    def test_identical_databases_identical_specs(self):
        database = _msssim_database(20)
        result = cross_validate([list(database) for _ in range(8)], step=0.5)
        self.assertEqual(len(result.per_split_specs), 8)
        self.assertEqual(len(set(result.per_split_specs)), 1)

    def test_test_srocc_matches_rerun(self):
        databases = {
            "a": _l1_database(21, lambda v: 1 - v),
            "b": _msssim_database(22),
            "c": _l1_database(23, lambda v: (1 - v) ** 3),
        }
        result = cross_validate(databases, step=0.5, transforms=["identity", "ln"])
        for i, held_out in enumerate(["a", "b", "c"]):
            training = {name: records for name, records in databases.items() if name != held_out}
            spec = grid_search(training, step=0.5, transforms=["identity", "ln"])
            self.assertEqual(result.per_split_specs[i], spec)
            self.assertAlmostEqual(
                result.per_split_srocc[i], evaluate_spec(spec, {held_out: databases[held_out]}), places=12
            )

    def test_fold_count_checked(self):
        with self.assertRaises(ValueError):
            cross_validate([_msssim_database(0)], step=0.5)
        with self.assertRaises(ValueError):
            cross_validate([_msssim_database(0), _msssim_database(1)], step=0.5, folds=3)

    def test_indicator_recovered_on_every_split(self):
        databases = [_msssim_database(seed) for seed in (30, 31, 32)]
        result = cross_validate(databases, step=0.25)
        for srocc_value in result.per_split_srocc:
            self.assertAlmostEqual(srocc_value, 1.0, places=12)
        self.assertEqual(result.final_spec.weights, (0.0, 0.0, 0.0, 0.0, 0.0, 1.0))
        self.assertAlmostEqual(result.final_spec.weight_sum, 1.0, delta=1e-9)

    @pytest.mark.slow
    def test_indicator_recovered_full_grid(self):
        databases = [_msssim_database(seed) for seed in (40, 41, 42)]
        result = cross_validate(databases, step=0.1)
        for srocc_value in result.per_split_srocc:
            self.assertAlmostEqual(srocc_value, 1.0, places=12)
        self.assertEqual(result.final_spec.weights, (0.0, 0.0, 0.0, 0.0, 0.0, 1.0))


class TestRecords(unittest.TestCase):
    def test_csv_and_directory_loading(self):
        with tempfile.TemporaryDirectory() as tmp:
            write_records_csv(str(Path(tmp) / "beta.csv"), _msssim_database(1, count=4))
            write_records_csv(str(Path(tmp) / "alpha.csv"), _msssim_database(0, count=3))
            databases = load_databases(tmp)
            self.assertEqual(list(databases), ["alpha", "beta"])
            self.assertEqual(len(databases["beta"]), 4)
            self.assertEqual(databases["alpha"][0].sequence_id, "s0_0")

    def test_missing_columns_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.csv"
            path.write_text("sequence_id,l1,score\nx,0.1,3\n", encoding="utf-8")
            with self.assertRaises(ValueError):
                read_records_csv(str(path))
            with self.assertRaises(ValueError):
                load_databases(str(Path(tmp) / "missing"))

    def test_write_calibration(self):
        databases = [_msssim_database(seed, count=6) for seed in (50, 51)]
        result = cross_validate(databases, step=0.5, transforms=["ln"])
        with tempfile.TemporaryDirectory() as tmp:
            path = write_calibration(result, tmp, single_loss_baselines(databases))
            lines = path.read_text(encoding="utf-8").splitlines()
            self.assertTrue(lines[0].startswith("split,held_out,transform,a1"))
            self.assertEqual(len(lines), 4)
            summary = (Path(tmp) / "calibration_summary.txt").read_text(encoding="utf-8")
            self.assertIn("Final transform: ln", summary)
            self.assertIn("msssim_loss", summary)

    def test_sequence_loss_vector_identical_frames(self):
        frames = synthetic_sequence(104, 100, 1, seed=3)
        lv = sequence_loss_vector(frames, [f.copy() for f in frames])
        np.testing.assert_allclose(lv.as_array(), np.zeros(6), atol=1e-5)
        with self.assertRaises(ValueError):
            sequence_loss_vector(frames, [])

    def test_video_listing_is_measured_with_the_given_extractor(self):
        reference = synthetic_sequence(104, 96, 2, seed=8)
        distorted, _ = stub_encode_decode(reference, 42)
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            write_yuv(str(root / "ref.yuv"), reference)
            write_yuv(str(root / "dist.yuv"), distorted)
            (root / "videos.csv").write_text(
                "sequence_id,reference,distorted,width,height,score\n"
                "clip,ref.yuv,dist.yuv,104,96,3.5\n",
                encoding="utf-8",
            )
            write_records_csv(str(root / "scores.csv"), _msssim_database(2, count=3))
            loose = load_databases(tmp, IdentityExtractor(), feature_normalizer=1.0)
            tight = load_databases(tmp, IdentityExtractor(), feature_normalizer=4.0)

        self.assertEqual(list(loose), ["scores", "videos"])
        self.assertEqual(len(loose["scores"]), 3)
        record = loose["videos"][0]
        self.assertEqual((record.sequence_id, record.subjective_score), ("clip", 3.5))
        expected = sequence_loss_vector(reference, distorted, IdentityExtractor(), 1.0)
        np.testing.assert_allclose(record.losses.as_array(), expected.as_array(), rtol=1e-6)
        self.assertGreater(record.losses.feat, 0.0)
        self.assertAlmostEqual(tight["videos"][0].losses.feat, record.losses.feat / 4.0, places=6)
        self.assertAlmostEqual(tight["videos"][0].losses.l1, record.losses.l1, places=9)

    def test_video_listing_errors_name_the_row(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "videos.csv"
            path.write_text(
                "sequence_id,reference,distorted,width,height,score\nclip,nope.yuv,nope.yuv,96,96,1\n",
                encoding="utf-8",
            )
            with self.assertRaisesRegex(ValueError, "videos.csv:2"):
                read_video_listing(str(path))
            path.write_text("sequence_id,reference,distorted,score\n", encoding="utf-8")
            with self.assertRaisesRegex(ValueError, "missing columns"):
                read_video_listing(str(path))


if __name__ == "__main__":
    unittest.main()
