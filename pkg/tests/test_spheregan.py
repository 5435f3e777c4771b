import math
import unittest

import numpy as np
import torch

from models import ReSphereConfig
from spheregan.geometry import (
    CLAMP_DELTA,
    inverse_stereographic,
    north_pole_distance,
    relativistic_cosine,
    relativistic_distance,
)
from spheregan.gradcheck import fuzz_points, gradcheck, is_degenerate, run_suite
from spheregan.losses import discriminator_loss, generator_adv_loss, moment_sums


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    return math.acos(max(-1.0, min(1.0, float(u @ v))))


def _project(x: np.ndarray) -> np.ndarray:
    sq = float(x @ x)
    return np.concatenate([2.0 * x, [sq - 1.0]]) / (sq + 1.0)


def _pole_angle(x: np.ndarray) -> float:
    t = _project(x)
    north = np.zeros_like(t)
    north[-1] = 1.0
    return _angle(north, t)


class TestGeometry(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_projection_lands_on_unit_sphere(self):
        x = self.rng.standard_normal((200, 6)) * self.rng.uniform(0.01, 50.0, size=(200, 1))
        t = inverse_stereographic(x)
        self.assertEqual(tuple(t.shape), (200, 7))
        norms = torch.linalg.vector_norm(t, dim=-1)
        self.assertTrue(torch.allclose(norms, torch.ones_like(norms), atol=1e-12))

    def test_origin_maps_to_south_pole(self):
        t = inverse_stereographic(np.zeros(3))
        self.assertTrue(torch.allclose(t, torch.tensor([0.0, 0.0, 0.0, -1.0], dtype=torch.float64)))
        self.assertAlmostEqual(float(north_pole_distance(np.zeros(3), 1)), math.pi, places=12)

    def test_gradient_at_origin_is_finite(self):
        for dtype in (torch.float32, torch.float64):
            for m in (1, 2, 3):
                x = torch.zeros(2, 4, dtype=dtype, requires_grad=True)
                north_pole_distance(x, m).sum().backward()
                self.assertTrue(bool(torch.isfinite(x.grad).all()), f"{dtype} m={m}")
                self.assertTrue(torch.equal(x.grad, torch.zeros_like(x.grad)))
        features = torch.zeros(3, 5, dtype=torch.float64, requires_grad=True)
        generator_adv_loss(torch.ones(3, 5, dtype=torch.float64), features, ReSphereConfig(feature_dim=5)).backward()
        self.assertTrue(bool(torch.isfinite(features.grad).all()))

    def test_unit_radius_is_on_the_equator(self):
        x = np.array([0.6, 0.8])
        self.assertAlmostEqual(float(north_pole_distance(x, 1)), math.pi / 2, places=12)
        self.assertAlmostEqual(float(north_pole_distance(x, 2)), (math.pi / 2) ** 2, places=12)

    def test_north_pole_distance_matches_explicit_angle(self):
        for _ in range(50):
            x = self.rng.standard_normal(5) * self.rng.uniform(0.1, 10.0)
            for m in (1, 2, 3):
                expected = _pole_angle(x) ** m
                self.assertAlmostEqual(float(north_pole_distance(x, m)), expected, delta=1e-9 * max(1.0, expected))

    def test_relativistic_distance_matches_explicit_angle(self):
        for _ in range(50):
            x_r = self.rng.standard_normal(4)
            x_f = self.rng.standard_normal(4)
            expected = _angle(_project(x_r), _project(x_f))
            self.assertAlmostEqual(float(relativistic_distance(x_r, x_f, 1)), expected, delta=1e-9)

    def test_equator_against_south_pole(self):
        x_f = np.array([1.0, 0.0, 0.0])
        for m in (1, 2, 3):
            self.assertAlmostEqual(
                float(relativistic_distance(np.zeros(3), x_f, m)), (math.pi / 2) ** m, places=10
            )

    def test_cosine_is_clamped(self):
        x = self.rng.standard_normal(3)
        self.assertLessEqual(float(relativistic_cosine(x, x)), 1.0 - CLAMP_DELTA)
        self.assertGreater(float(relativistic_cosine(x, x, clamp=False)), 1.0 - 1e-12)
        self.assertTrue(math.isfinite(float(relativistic_distance(x, x, 1))))

    def test_triangle_inequality(self):
        for _ in range(100):
            x, y, z = (self.rng.standard_normal(3) * 3.0 for _ in range(3))
            d_xy = float(relativistic_distance(x, y, 1))
            d_yz = float(relativistic_distance(y, z, 1))
            d_xz = float(relativistic_distance(x, z, 1))
            self.assertLessEqual(d_xz, d_xy + d_yz + 1e-9)

    def test_rejects_bad_moment_and_non_finite_input(self):
        with self.assertRaises(ValueError):
            north_pole_distance(np.ones(2), 0)
        with self.assertRaises(ValueError):
            relativistic_distance(np.ones(2), np.ones(2), 0)
        with self.assertRaises(ValueError):
            inverse_stereographic(np.array([1.0, float("nan")]))


class TestLosses(unittest.TestCase):

    def setUp(self):
        self.cfg = ReSphereConfig(num_moments=3, feature_dim=5)
        self.rng = np.random.default_rng(11)

    def test_origin_pole_terms(self):
        zeros = np.zeros((1, 5))
        fake_pole, real_pole, relative = moment_sums(zeros, zeros, self.cfg)
        expected = math.pi + math.pi ** 2 + math.pi ** 3
        self.assertAlmostEqual(float(fake_pole), expected, delta=1e-9)
        self.assertAlmostEqual(float(real_pole), expected, delta=1e-9)
        self.assertLess(float(relative), 1e-3)
        self.assertAlmostEqual(float(generator_adv_loss(zeros, zeros, self.cfg)), -expected, delta=1e-3)

    def test_discriminator_loss_vanishes_for_identical_batches(self):
        batch = self.rng.standard_normal((8, 5))
        self.assertLess(abs(float(discriminator_loss(batch, batch, self.cfg))), 1e-3)

    def test_discriminator_limit_with_fake_at_north_pole(self):
        real = np.zeros((1, 5))
        fake = np.zeros((1, 5))
        fake[0, 0] = 1e6
        expected = -2.0 * sum(math.pi ** m for m in (1, 2, 3))
        self.assertAlmostEqual(float(discriminator_loss(real, fake, self.cfg)), expected, delta=0.05)

    def test_matches_unbatched_loop(self):
        real = self.rng.standard_normal((6, 5))
        fake = self.rng.standard_normal((6, 5)) * 2.0
        fake_pole = real_pole = relative = 0.0
        for m in (1, 2, 3):
            fake_pole += np.mean([_pole_angle(x) ** m for x in fake])
            real_pole += np.mean([_pole_angle(x) ** m for x in real])
            relative += np.mean([_angle(_project(r), _project(f)) ** m for r, f in zip(real, fake)])
        self.assertAlmostEqual(float(generator_adv_loss(real, fake, self.cfg)), -fake_pole + relative, delta=1e-8)
        self.assertAlmostEqual(
            float(discriminator_loss(real, fake, self.cfg)), fake_pole - real_pole - relative, delta=1e-8
        )

    def test_cross_pairing_averages_all_pairs(self):
        cfg = ReSphereConfig(num_moments=2, feature_dim=3, pairing="cross")
        real = self.rng.standard_normal((4, 3))
        fake = self.rng.standard_normal((4, 3))
        relative = 0.0
        for m in (1, 2):
            relative += np.mean([_angle(_project(r), _project(f)) ** m for r in real for f in fake])
        _, _, got = moment_sums(real, fake, cfg)
        self.assertAlmostEqual(float(got), relative, delta=1e-8)

    def test_joint_permutation_invariance(self):
        real = self.rng.standard_normal((7, 5))
        fake = self.rng.standard_normal((7, 5))
        order = self.rng.permutation(7)
        for loss in (generator_adv_loss, discriminator_loss):
            self.assertAlmostEqual(
                float(loss(real, fake, self.cfg)), float(loss(real[order], fake[order], self.cfg)), delta=1e-10
            )

    def test_single_moment_uses_first_power_only(self):
        cfg = ReSphereConfig(num_moments=1, feature_dim=5)
        zeros = np.zeros((2, 5))
        fake_pole, _, _ = moment_sums(zeros, zeros, cfg)
        self.assertAlmostEqual(float(fake_pole), math.pi, places=10)

    def test_gradients_flow_to_both_batches(self):
        real = torch.randn(4, 5, dtype=torch.float64, requires_grad=True)
        fake = torch.randn(4, 5, dtype=torch.float64, requires_grad=True)
        discriminator_loss(real, fake, self.cfg).backward()
        self.assertTrue(torch.isfinite(real.grad).all())
        self.assertTrue(torch.isfinite(fake.grad).all())
        self.assertGreater(float(fake.grad.abs().sum()), 0.0)

    def test_shape_checks(self):
        with self.assertRaises(ValueError):
            generator_adv_loss(np.zeros((2, 3)), np.zeros((3, 3)), self.cfg)
        with self.assertRaises(ValueError):
            discriminator_loss(np.zeros(3), np.zeros(3), self.cfg)


class TestGradCheck(unittest.TestCase):

    def test_north_pole_gradients_agree(self):
        for point in fuzz_points("north_pole", 20, dim=6, seed=3):
            for m in (1, 2, 3):
                report = gradcheck("north_pole", point, m)
                self.assertTrue(report.passed, report.to_dict())
                self.assertLess(report.max_rel_error, 1e-4)
                self.assertLess(report.autograd_rel_error, 1e-6)

    def test_relativistic_gradients_agree(self):
        for point in fuzz_points("relativistic", 20, dim=6, seed=4):
            for m in (1, 2, 3):
                report = gradcheck("relativistic", point, m)
                self.assertTrue(report.passed, report.to_dict())
                self.assertLess(report.max_rel_error, 1e-4)

    def test_degenerate_points_are_rejected(self):
        x = np.array([0.3, -0.2, 0.5])
        self.assertTrue(is_degenerate("relativistic", [x, x]))
        with self.assertRaises(ValueError):
            gradcheck("relativistic", [x, x], 1)

    def test_bad_arguments(self):
        with self.assertRaises(ValueError):
            gradcheck("elsewhere", [np.ones(2)], 1)
        with self.assertRaises(ValueError):
            gradcheck("relativistic", [np.ones(2)], 1)

    def test_fuzz_points_are_seeded(self):
        a = fuzz_points("relativistic", 5, dim=4, seed=9)
        b = fuzz_points("relativistic", 5, dim=4, seed=9)
        for pa, pb in zip(a, b):
            for x, y in zip(pa, pb):
                np.testing.assert_array_equal(x, y)

    def test_run_suite_covers_both_functions_and_moments(self):
        reports = run_suite(count=5, dim=4, moments=(1, 2, 3), seed=1)
        self.assertEqual(len(reports), 2 * 3 * 5)
        self.assertEqual({(r.function, r.moment) for r in reports},
                         {(f, m) for f in ("north_pole", "relativistic") for m in (1, 2, 3)})
        self.assertTrue(all(r.passed for r in reports))
