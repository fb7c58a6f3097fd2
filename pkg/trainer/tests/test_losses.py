import math

import numpy as np
import pytest
import torch

from das3d_trainer.losses import loss_depth, loss_disc, loss_rgb, ssim_mean, total_loss


def numpy_ssim(a, b, window=11, sigma=1.5):
    """Independent SSIM oracle: scipy Gaussian filtering over valid windows."""
    from scipy.ndimage import correlate

    coords = np.arange(window) - (window - 1) / 2.0
    g = np.exp(-(coords**2) / (2 * sigma**2))
    g /= g.sum()
    kernel = np.outer(g, g)
    c1, c2 = 0.01**2, 0.03**2
    vals = []
    margin = window // 2

    def filt(x):
        full = correlate(x, kernel, mode="constant")
        return full[margin:-margin, margin:-margin]

    for ch in range(a.shape[0]):
        x, y = a[ch], b[ch]
        mu_x, mu_y = filt(x), filt(y)
        var_x = filt(x * x) - mu_x**2
        var_y = filt(y * y) - mu_y**2
        cov = filt(x * y) - mu_x * mu_y
        ssim = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
            (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        )
        vals.append(ssim.mean())
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# depth L2


def test_loss_depth_identity():
    z = torch.rand(2, 1, 16, 16)
    assert float(loss_depth(z, z)) == 0.0


def test_loss_depth_max_deviation():
    z = torch.zeros(1, 1, 8, 8)
    assert float(loss_depth(z, torch.ones_like(z))) == pytest.approx(1.0, abs=1e-7)


def test_loss_depth_elementwise_oracle():
    gen = np.random.default_rng(0)
    a = gen.random((1, 1, 6, 6)).astype(np.float32)
    b = gen.random((1, 1, 6, 6)).astype(np.float32)
    got = float(loss_depth(torch.from_numpy(a), torch.from_numpy(b)))
    want = float(np.mean((a - b) ** 2))
    assert abs(got - want) <= 1e-7


def test_loss_depth_shape_mismatch():
    with pytest.raises(ValueError):
        loss_depth(torch.zeros(1, 1, 4, 4), torch.zeros(1, 1, 5, 5))


# ---------------------------------------------------------------------------
# RGB L2 + SSIM


def test_loss_rgb_identity_is_zero():
    img = torch.rand(1, 3, 16, 16)
    assert float(loss_rgb(img, img)) == pytest.approx(0.0, abs=1e-6)


def test_ssim_constant_shift_closed_form():
    # constant images: all variance terms vanish, only the luminance term
    # (2*m1*m2 + C1) / (m1^2 + m2^2 + C1) survives
    m1, m2 = 0.3, 0.5
    a = torch.full((1, 1, 16, 16), m1)
    b = torch.full((1, 1, 16, 16), m2)
    c1 = 0.01**2
    want = (2 * m1 * m2 + c1) / (m1**2 + m2**2 + c1)
    assert float(ssim_mean(a, b)) == pytest.approx(want, abs=1e-6)


def test_ssim_matches_numpy_oracle():
    gen = np.random.default_rng(3)
    a = gen.random((3, 20, 20)).astype(np.float32)
    b = np.clip(a + 0.1 * gen.standard_normal((3, 20, 20)).astype(np.float32), 0, 1)
    got = float(ssim_mean(torch.from_numpy(a)[None], torch.from_numpy(b)[None]))
    want = numpy_ssim(a.astype(np.float64), b.astype(np.float64))
    assert abs(got - want) <= 1e-5


def test_loss_rgb_rejects_small_images():
    img = torch.rand(1, 3, 8, 8)
    with pytest.raises(ValueError):
        loss_rgb(img, img)


# ---------------------------------------------------------------------------
# focal


def test_focal_confident_correct_is_tiny():
    mask = (torch.rand(1, 1, 12, 12) > 0.8).float()
    pred = mask.clone().clamp(1e-7, 1 - 1e-7)
    assert float(loss_disc(pred, mask)) <= 1e-6


def test_focal_half_prediction_empty_mask():
    pred = torch.full((1, 1, 10, 10), 0.5)
    mask = torch.zeros_like(pred)
    want = -0.25 * math.log(0.5)
    assert float(loss_disc(pred, mask, gamma=2.0)) == pytest.approx(want, rel=1e-6)


def test_focal_flipping_gt_pixel_increases_loss():
    mask = torch.zeros(1, 1, 8, 8)
    mask[0, 0, 2, 3] = 1.0
    pred = mask.clone().clamp(0.01, 0.99)
    base = float(loss_disc(pred, mask))
    flipped = mask.clone()
    flipped[0, 0, 5, 5] = 1.0
    assert float(loss_disc(pred, flipped)) > base


def test_focal_formula_oracle():
    gen = np.random.default_rng(7)
    pred = gen.uniform(0.02, 0.98, size=(1, 1, 6, 6)).astype(np.float32)
    mask = (gen.random((1, 1, 6, 6)) > 0.7).astype(np.float32)
    got = float(loss_disc(torch.from_numpy(pred), torch.from_numpy(mask)))
    p_t = np.where(mask > 0.5, pred, 1 - pred).astype(np.float64)
    want = float(np.mean(-((1 - p_t) ** 2) * np.log(p_t)))
    assert abs(got - want) <= 1e-6


def test_focal_rejects_out_of_range():
    with pytest.raises(ValueError):
        loss_disc(torch.full((1, 1, 4, 4), 1.5), torch.zeros(1, 1, 4, 4))


# ---------------------------------------------------------------------------
# total


def test_total_is_sum_of_terms():
    gen = torch.Generator().manual_seed(5)
    z = torch.rand(2, 1, 16, 16, generator=gen)
    z_rec = torch.rand(2, 1, 16, 16, generator=gen)
    i = torch.rand(2, 3, 16, 16, generator=gen)
    i_rec = torch.rand(2, 3, 16, 16, generator=gen)
    pred = torch.rand(2, 1, 16, 16, generator=gen)
    mask = (torch.rand(2, 1, 16, 16, generator=gen) > 0.8).float()
    total, parts = total_loss(z, z_rec, i, i_rec, pred, mask)
    assert abs(float(total) - sum(float(v) for v in parts.values())) <= 1e-6
    assert set(parts) == {"rec_depth", "rec_rgb", "disc"}
