"""Training losses: depth L2, RGB L2 + SSIM, focal discriminator loss, and
their sum as the total objective."""

from __future__ import annotations

import torch
from torch.nn import functional as F


def loss_depth(depth: torch.Tensor, depth_rec: torch.Tensor) -> torch.Tensor:
    """Mean squared error between the normal depth and its reconstruction."""
    if depth.shape != depth_rec.shape:
        raise ValueError(f"shape mismatch: {tuple(depth.shape)} vs {tuple(depth_rec.shape)}")
    return F.mse_loss(depth_rec, depth)


def _gaussian_window(size: int, sigma: float, device, dtype) -> torch.Tensor:
    coords = torch.arange(size, device=device, dtype=dtype) - (size - 1) / 2.0
    g = torch.exp(-(coords**2) / (2.0 * sigma**2))
    g = g / g.sum()
    return torch.outer(g, g)


def ssim_mean(
    a: torch.Tensor, b: torch.Tensor, window: int = 11, sigma: float = 1.5
) -> torch.Tensor:
    """Mean SSIM over valid window positions, Gaussian-weighted, unit range.

    Inputs are (N, C, H, W); statistics are computed per channel and averaged.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.shape[-1] < window or a.shape[-2] < window:
        raise ValueError(f"image smaller than the {window}x{window} SSIM window")
    # float64 keeps the variance/covariance residuals of near-constant
    # patches far below the stabilizer constants
    a = a.double()
    b = b.double()
    c = a.shape[1]
    kernel = _gaussian_window(window, sigma, a.device, a.dtype).expand(c, 1, window, window)
    c1 = 0.01**2
    c2 = 0.03**2

    def filt(x):
        return F.conv2d(x, kernel, groups=c)

    mu_a = filt(a)
    mu_b = filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return (num / den).mean()


def loss_rgb(rgb: torch.Tensor, rgb_rec: torch.Tensor, window: int = 11) -> torch.Tensor:
    """MSE plus (1 - mean SSIM) between the normal RGB and its reconstruction."""
    return F.mse_loss(rgb_rec, rgb) + (1.0 - ssim_mean(rgb, rgb_rec, window=window))


def loss_disc(
    pred: torch.Tensor, mask: torch.Tensor, gamma: float = 2.0, eps: float = 1e-7
) -> torch.Tensor:
    """Mean focal loss between predicted anomaly probabilities and the mask.

    pred holds probabilities in [0, 1]; no class-weighting term is applied.
    """
    if pred.shape != mask.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(mask.shape)}")
    with torch.no_grad():
        if float(pred.min()) < 0.0 or float(pred.max()) > 1.0:
            raise ValueError("pred must contain probabilities in [0, 1]")
    p = pred.clamp(eps, 1.0 - eps)
    p_t = torch.where(mask > 0.5, p, 1.0 - p)
    return (-((1.0 - p_t) ** gamma) * torch.log(p_t)).mean()


def total_loss(
    depth: torch.Tensor,
    depth_rec: torch.Tensor,
    rgb: torch.Tensor,
    rgb_rec: torch.Tensor,
    pred: torch.Tensor,
    mask: torch.Tensor,
    gamma: float = 2.0,
    window: int = 11,
) -> tuple[torch.Tensor, dict]:
    """Sum of the three terms plus a per-term breakdown for logging."""
    l_z = loss_depth(depth, depth_rec)
    l_i = loss_rgb(rgb, rgb_rec, window=window)
    l_d = loss_disc(pred, mask, gamma=gamma)
    return l_z + l_i + l_d, {"rec_depth": l_z, "rec_rgb": l_i, "disc": l_d}
