import math
import unittest

import numpy as np
import torch
import torch.nn.functional as F
from numpy.lib.stride_tricks import sliding_window_view

from metrics.features import IdentityExtractor, RandomConvExtractor, Vgg19Extractor, build_extractor
from metrics.quality import (
    feature_loss, gradient_loss, l1_loss, l2_loss, measure_loss_vector, ms_ssim,
    ms_ssim_weights, msssim_loss, psnr, psnr_planes, srocc, ssim, ssim_loss,
)
from models import PlanarFrame


def _gaussian_window():
    coords = np.arange(11) - 5.0
    g = np.exp(-(coords ** 2) / (2 * 1.5 ** 2))
    g /= g.sum()
    return np.outer(g, g)


def _ssim_oracle(x, y):
    """Valid-window SSIM and contrast-structure means of two 2-D arrays."""
    w = _gaussian_window()

    def blur(v):
        return np.einsum("ijkl,kl->ij", sliding_window_view(v, (11, 11)), w)

    c1, c2 = 0.01 ** 2, 0.03 ** 2
    mx, my = blur(x), blur(y)
    sx = blur(x * x) - mx ** 2
    sy = blur(y * y) - my ** 2
    sxy = blur(x * y) - mx * my
    cs = (2 * sxy + c2) / (sx + sy + c2)
    lum = (2 * mx * my + c1) / (mx ** 2 + my ** 2 + c1)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def _pool2(v):
    h, w = v.shape[0] // 2 * 2, v.shape[1] // 2 * 2
    return v[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _block(seed, size=16, dtype=torch.float64):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand(1, 3, size, size, generator=gen, dtype=dtype)


class TestPixelLosses(unittest.TestCase):
    def test_l1_cases(self):
        a = _block(0)
        self.assertEqual(float(l1_loss(a, a)), 0.0)
        self.assertAlmostEqual(float(l1_loss(torch.zeros(1, 3, 8, 8), torch.ones(1, 3, 8, 8))), 1.0)
        half = torch.full((1, 3, 8, 8), 0.5)
        shifted = torch.clamp(half + 0.25, 0, 1)
        self.assertAlmostEqual(float(l1_loss(half, shifted)), 0.25, places=6)

    def test_l2_cases(self):
        a = _block(1)
        self.assertEqual(float(l2_loss(a, a)), 0.0)
        self.assertAlmostEqual(float(l2_loss(torch.zeros(1, 3, 8, 8), torch.ones(1, 3, 8, 8))), 1.0)
        self.assertAlmostEqual(
            float(l2_loss(torch.full((1, 3, 8, 8), 0.5), torch.full((1, 3, 8, 8), 0.75))), 0.0625, places=7
        )

    def test_shape_mismatch_rejected(self):
        with self.assertRaises(ValueError):
            l1_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 3, 8, 9))
        with self.assertRaises(ValueError):
            gradient_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 1, 8, 8))

    def test_gradient_loss_constants(self):
        a = torch.full((1, 3, 12, 12), 0.2)
        b = torch.full((1, 3, 12, 12), 0.9)
        self.assertEqual(float(gradient_loss(a, b)), 0.0)
        self.assertEqual(float(gradient_loss(a, a)), 0.0)

    def test_gradient_loss_step_edge_matches_pixel_loop(self):
        size = 16
        a = np.zeros((3, size, size))
        a[:, :, size // 2:] = 1.0
        b = np.full((3, size, size), 0.5)

        def forward_diffs(v):
            dx = np.zeros_like(v)
            dy = np.zeros_like(v)
            for c in range(v.shape[0]):
                for i in range(size):
                    for j in range(size):
                        dx[c, i, j] = v[c, i, min(j + 1, size - 1)] - v[c, i, j]
                        dy[c, i, j] = v[c, min(i + 1, size - 1), j] - v[c, i, j]
            return dx, dy

        dxa, dya = forward_diffs(a)
        dxb, dyb = forward_diffs(b)
        expected = (np.abs(dxa - dxb).mean() + np.abs(dya - dyb).mean()) / 4.0

        value = gradient_loss(torch.from_numpy(a).unsqueeze(0), torch.from_numpy(b).unsqueeze(0))
        self.assertAlmostEqual(float(value), expected, places=12)
        self.assertAlmostEqual(expected, 1.0 / (4 * size), places=12)


class TestFeatureLoss(unittest.TestCase):
    def test_identical_inputs(self):
        a = _block(2)
        self.assertEqual(float(feature_loss(a, a, RandomConvExtractor(seed=3))), 0.0)

    def test_identity_extractor_equals_l2(self):
        a, b = _block(4), _block(5)
        self.assertAlmostEqual(float(feature_loss(a, b, IdentityExtractor())), float(l2_loss(a, b)), places=12)

    def test_random_extractor_recomputed(self):
        a, b = _block(6), _block(7)
        extractor = RandomConvExtractor(seed=11)

        def features(x):
            out = F.relu(F.conv2d(x, extractor.weight0.double(), stride=1, padding=1))
            out = F.relu(F.conv2d(out, extractor.weight1.double(), stride=2, padding=1))
            return F.conv2d(out, extractor.weight2.double(), stride=1, padding=1)

        expected = min(float(((features(a) - features(b)) ** 2).mean()) / 2.0, 1.0)
        self.assertAlmostEqual(float(feature_loss(a, b, extractor, normalizer=2.0)), expected, places=10)

    def test_same_seed_same_weights(self):
        one, two = RandomConvExtractor(seed=5), RandomConvExtractor(seed=5)
        self.assertTrue(torch.equal(one.weight2, two.weight2))
        self.assertEqual(len(list(one.parameters())), 0)

    def test_bad_normalizer_and_name(self):
        with self.assertRaises(ValueError):
            feature_loss(_block(0), _block(1), IdentityExtractor(), normalizer=0.0)
        with self.assertRaises(ValueError):
            build_extractor("alexnet")

    def test_vgg19_extractor_without_weights(self):
        extractor = build_extractor("vgg19", pretrained=False)
        self.assertIsInstance(extractor, Vgg19Extractor)
        self.assertTrue(all(not p.requires_grad for p in extractor.parameters()))
        a = torch.rand(1, 3, 96, 96, generator=torch.Generator().manual_seed(4))
        with torch.no_grad():
            self.assertEqual(tuple(extractor(a).shape), (1, 512, 6, 6))
        self.assertEqual(float(feature_loss(a, a, extractor)), 0.0)
        self.assertIsInstance(build_extractor("identity"), IdentityExtractor)


class TestSsim(unittest.TestCase):
    def test_identical_and_constant(self):
        a = _block(8)
        self.assertAlmostEqual(float(ssim(a, a)), 1.0, places=10)
        self.assertAlmostEqual(float(ssim_loss(a, a)), 0.0, places=10)
        c = torch.full((1, 3, 16, 16), 0.5, dtype=torch.float64)
        self.assertAlmostEqual(float(ssim(c, c)), 1.0, places=10)

    def test_binary_inverse_matches_direct_formula(self):
        rng = np.random.default_rng(0)
        binary = (rng.random((24, 24)) > 0.5).astype(np.float64)
        inverse = 1.0 - binary
        expected, _ = _ssim_oracle(binary, inverse)

        a = torch.from_numpy(np.stack([binary] * 3)).unsqueeze(0)
        b = torch.from_numpy(np.stack([inverse] * 3)).unsqueeze(0)
        self.assertAlmostEqual(float(ssim(a, b)), expected, places=9)
        self.assertGreaterEqual(float(ssim(a, b)), -1.0)
        self.assertAlmostEqual(float(ssim_loss(a, b)), (1 - expected) / 2, places=9)

    def test_mean_channel_mode(self):
        a, b = _block(9, 20), _block(10, 20)
        per_channel = [
            _ssim_oracle(a[0, c].numpy(), b[0, c].numpy())[0] for c in range(3)
        ]
        self.assertAlmostEqual(float(ssim(a, b, channel="mean")), float(np.mean(per_channel)), places=9)
        with self.assertRaises(ValueError):
            ssim(a, b, channel="rgb")

    def test_window_larger_than_block_rejected(self):
        with self.assertRaises(ValueError):
            ssim(torch.zeros(1, 3, 10, 10), torch.zeros(1, 3, 10, 10))


class TestMsSsim(unittest.TestCase):
    def test_identical_is_one(self):
        a = _block(12, 96)
        self.assertAlmostEqual(float(ms_ssim(a, a)), 1.0, places=10)
        self.assertAlmostEqual(float(msssim_loss(a, a)), 0.0, places=10)

    def test_single_scale_equals_ssim(self):
        a = _block(13, 32)
        b = torch.clamp(a + 0.05 * _block(14, 32), 0, 1)
        self.assertAlmostEqual(float(ms_ssim(a, b, scales=1)), float(ssim(a, b)), places=10)

    def test_noisy_matches_per_scale_oracle(self):
        rng = np.random.default_rng(1)
        clean = rng.random((96, 96))
        noisy = np.clip(clean + 0.1 * rng.standard_normal((96, 96)), 0, 1)
        weights = ms_ssim_weights(4).numpy()

        x, y, expected = clean, noisy, 1.0
        for scale in range(4):
            s, cs = _ssim_oracle(x, y)
            term = s if scale == 3 else cs
            expected *= max(term, 1e-8) ** weights[scale]
            x, y = _pool2(x), _pool2(y)

        a = torch.from_numpy(np.stack([clean] * 3)).unsqueeze(0)
        b = torch.from_numpy(np.stack([noisy] * 3)).unsqueeze(0)
        value = float(ms_ssim(a, b))
        self.assertAlmostEqual(value, expected, places=8)
        self.assertTrue(0.0 <= value <= 1.0)

    def test_weights_renormalized(self):
        self.assertAlmostEqual(float(ms_ssim_weights(4).sum()), 1.0, places=12)
        self.assertAlmostEqual(float(ms_ssim_weights(4)[0]), 0.0448 / (0.0448 + 0.2856 + 0.3001 + 0.2363), places=12)

    def test_too_small_rejected(self):
        with self.assertRaises(ValueError):
            ms_ssim(torch.zeros(1, 3, 80, 80), torch.zeros(1, 3, 80, 80))


class TestLossVector(unittest.TestCase):
    def test_identical_blocks_all_zero(self):
        a = _block(15, 96, torch.float32)
        lv = measure_loss_vector(a, a)
        for value in lv.as_array():
            self.assertAlmostEqual(float(value), 0.0, places=5)

    def test_symmetric_and_in_range(self):
        a, b = _block(16, 96), _block(17, 96)
        forward = measure_loss_vector(a, b).as_array()
        backward = measure_loss_vector(b, a).as_array()
        np.testing.assert_allclose(forward, backward, atol=1e-9)
        self.assertTrue(np.all((forward >= 0) & (forward <= 1)))


class TestGradients(unittest.TestCase):
    def _check(self, fn, size=12):
        a = _block(20, size).requires_grad_(True)
        b = _block(21, size).requires_grad_(True)
        self.assertTrue(torch.autograd.gradcheck(fn, (a, b), eps=1e-6, atol=1e-6, rtol=1e-4))

    def test_pixel_losses(self):
        self._check(l1_loss)
        self._check(l2_loss)
        self._check(gradient_loss)

    def test_feature_loss(self):
        extractor = RandomConvExtractor(seed=2)
        self._check(lambda a, b: feature_loss(a, b, extractor, normalizer=100.0))

    def test_structural_losses(self):
        self._check(ssim_loss, size=14)
        self._check(lambda a, b: msssim_loss(a, b, scales=2), size=22)


class TestPsnr(unittest.TestCase):
    def _frame(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 256, (16, 16))
        cb = rng.integers(0, 256, (8, 8))
        cr = rng.integers(0, 256, (8, 8))
        return PlanarFrame(y, cb, cr, 8, "420")

    def test_identical_is_infinite(self):
        frame = self._frame(0)
        self.assertEqual(psnr(frame, frame.copy()), math.inf)

    def test_closed_form(self):
        self.assertAlmostEqual(psnr_planes(np.zeros((4, 4)), np.full((4, 4), 0.1), peak=1.0), 20.0, places=9)

    def test_matches_pixel_loop(self):
        a, b = self._frame(1), self._frame(2)
        total = 0.0
        for i in range(16):
            for j in range(16):
                total += (float(a.y[i, j]) - float(b.y[i, j])) ** 2
        expected = 10 * math.log10(255.0 ** 2 / (total / 256))
        self.assertAlmostEqual(psnr(a, b), expected, places=9)

    def test_geometry_mismatch(self):
        small = PlanarFrame(np.zeros((8, 8)), np.zeros((4, 4)), np.zeros((4, 4)), 8, "420")
        with self.assertRaises(ValueError):
            psnr(self._frame(0), small)


class TestSrocc(unittest.TestCase):
    def test_monotone_and_reversed(self):
        x = [0.1, 0.4, 0.5, 0.9, 1.3]
        self.assertAlmostEqual(srocc(x, x), 1.0)
        self.assertAlmostEqual(srocc(x, list(reversed(x))), -1.0)

    def test_ties_use_average_ranks(self):
        # ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4)
        self.assertAlmostEqual(srocc([1, 2, 2, 4], [10, 20, 30, 40]), 4.5 / math.sqrt(4.5 * 5.0), places=12)

    def test_rank_invariance(self):
        rng = np.random.default_rng(3)
        x, y = rng.random(20), rng.random(20)
        self.assertAlmostEqual(srocc(np.exp(3 * x), y), srocc(x, y), places=12)

    def test_undefined_cases(self):
        self.assertTrue(math.isnan(srocc([1.0], [2.0])))
        self.assertTrue(math.isnan(srocc([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])))
        with self.assertRaises(ValueError):
            srocc([1, 2], [1, 2, 3])


if __name__ == "__main__":
    unittest.main()
