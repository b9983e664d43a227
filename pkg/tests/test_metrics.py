import json
from pathlib import Path

import numpy as np
import pytest

from scanmask import UndefinedMetricError, gen_phantom, hfen, nmse, ssim
from scanmask.errors import InvalidInputError
from scanmask.metrics import (
    SSIM_SIGMA,
    SSIM_WINDOW,
    central_crop,
    evaluate,
    gaussian_window,
    log_kernel,
)

from oracles import naive_hfen, naive_ssim

GOLDEN = json.loads((Path(__file__).parent / "data" / "golden_metrics.json").read_text())


def golden_pair():
    a = gen_phantom(GOLDEN["gt_seed"], GOLDEN["h"], GOLDEN["w"])
    rng = np.random.default_rng(GOLDEN["noise_seed"])
    noise = rng.standard_normal(a.shape) + 1j * rng.standard_normal(a.shape)
    return a, a + GOLDEN["noise_scale"] * noise


class TestNMSE:
    def test_identity(self, rng):
        x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        assert nmse(x, x) == 0

    def test_zero_reconstruction(self, rng):
        x = rng.standard_normal((8, 8)) + 0j
        assert nmse(x, np.zeros_like(x)) == pytest.approx(1.0, rel=1e-12)

    def test_double_reconstruction(self, rng):
        x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        assert nmse(x, 2 * x) == pytest.approx(1.0, rel=1e-12)

    def test_phase_rotation_invariance(self, rng):
        x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        y = x + 0.1 * rng.standard_normal((8, 8))
        phase = np.exp(0.7j)
        assert nmse(phase * x, phase * y) == pytest.approx(nmse(x, y), rel=1e-12)

    def test_zero_reference_rejected(self):
        with pytest.raises(UndefinedMetricError):
            nmse(np.zeros((8, 8), dtype=complex), np.ones((8, 8), dtype=complex))


class TestSSIM:
    def test_identity(self):
        x = gen_phantom(1, 16, 16)
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_constant_offset_penalized(self):
        x = gen_phantom(1, 16, 16)
        assert ssim(x, x + 5.0) < 1.0

    def test_too_small_image_rejected(self):
        x = np.ones((8, 8), dtype=complex)
        with pytest.raises(InvalidInputError):
            ssim(x, x)

    def test_golden_value(self):
        a, b = golden_pair()
        assert ssim(a, b) == pytest.approx(GOLDEN["ssim"], abs=1e-9)

    def test_oracle_agreement(self, rng):
        a = gen_phantom(21, 20, 20)
        b = a * (1 + 0.1 * rng.standard_normal((20, 20)))
        win = gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
        assert ssim(a, b) == pytest.approx(naive_ssim(a, b, win), abs=1e-10)


class TestHFEN:
    def test_identity(self):
        x = gen_phantom(1, 16, 16)
        assert hfen(x, x) == 0

    def test_kernel_zero_sum(self):
        assert abs(log_kernel().sum()) < 1e-14

    def test_constant_offset_vanishes_in_interior(self):
        # the zero-mean kernel annihilates constants away from the zero-padded rim
        x = np.abs(gen_phantom(1, 32, 32))
        k = log_kernel()
        from scipy.signal import convolve2d

        diff = convolve2d(x + 3.0, k, mode="same") - convolve2d(x, k, mode="same")
        r = k.shape[0] // 2
        assert np.abs(diff[r:-r, r:-r]).max() < 1e-10

    def test_golden_value(self):
        a, b = golden_pair()
        assert hfen(a, b) == pytest.approx(GOLDEN["hfen"], abs=1e-9)

    def test_oracle_agreement(self, rng):
        a = gen_phantom(22, 18, 18)
        b = a + 0.05 * rng.standard_normal((18, 18))
        assert hfen(a, b) == pytest.approx(naive_hfen(a, b, log_kernel()), abs=1e-10)


class TestEvaluate:
    def test_report_fields(self):
        a, b = golden_pair()
        rep = evaluate(a, b)
        assert rep.nmse > 0 and rep.hfen > 0 and rep.ssim <= 1 + 1e-9

    def test_central_crop(self, rng):
        x = rng.standard_normal((16, 16))
        c = central_crop(x, 0.5)
        assert c.shape == (8, 8)
        np.testing.assert_array_equal(c, x[4:12, 4:12])

    def test_crop_changes_metrics(self):
        a, b = golden_pair()
        assert evaluate(a, b, crop_fraction=None).nmse != evaluate(a + 0.0, b, 0.75).nmse
