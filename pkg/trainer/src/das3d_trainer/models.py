"""Small UNet-style networks.

Two reconstructors (RGB and depth) restore the normal appearance from an
augmented input; the discriminator predicts the anomaly mask from the fused
shallow/deep features of both reconstructors.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F


def _block(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class ReconstructionUNet(nn.Module):
    """4-stage encoder-decoder; forward returns the output and the feature
    taps used for fusion (first two encoder and last two decoder blocks)."""

    def __init__(self, in_channels: int, base: int = 8):
        super().__init__()
        self.enc1 = _block(in_channels, base)
        self.enc2 = _block(base, base * 2)
        self.enc3 = _block(base * 2, base * 4)
        self.enc4 = _block(base * 4, base * 8)
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _block(base * 8, base * 8)
        self.dec4 = _block(base * 8 + base * 8, base * 4)
        self.dec3 = _block(base * 4 + base * 4, base * 2)
        self.dec2 = _block(base * 2 + base * 2, base)
        self.dec1 = _block(base + base, base)
        self.out = nn.Conv2d(base, in_channels, 1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        e3 = self.enc3(self.pool(e2))
        e4 = self.enc4(self.pool(e3))
        b = self.bottleneck(self.pool(e4))

        def up(t, like):
            return F.interpolate(t, size=like.shape[-2:], mode="bilinear", align_corners=False)

        d4 = self.dec4(torch.cat([up(b, e4), e4], dim=1))
        d3 = self.dec3(torch.cat([up(d4, e3), e3], dim=1))
        d2 = self.dec2(torch.cat([up(d3, e2), e2], dim=1))
        d1 = self.dec1(torch.cat([up(d2, e1), e1], dim=1))
        return self.out(d1), [e1, e2, d2, d1]


class DiscriminatorUNet(nn.Module):
    """3-stage UNet over the fused features; outputs per-pixel logits."""

    def __init__(self, in_channels: int, base: int = 16):
        super().__init__()
        self.reduce = nn.Sequential(
            nn.Conv2d(in_channels, base, 1), nn.BatchNorm2d(base), nn.ReLU(inplace=True)
        )
        self.enc1 = _block(base, base)
        self.enc2 = _block(base, base * 2)
        self.enc3 = _block(base * 2, base * 4)
        self.pool = nn.MaxPool2d(2)
        self.dec2 = _block(base * 4 + base * 2, base * 2)
        self.dec1 = _block(base * 2 + base, base)
        self.out = nn.Conv2d(base, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.reduce(x)
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        e3 = self.enc3(self.pool(e2))

        def up(t, like):
            return F.interpolate(t, size=like.shape[-2:], mode="bilinear", align_corners=False)

        d2 = self.dec2(torch.cat([up(e3, e2), e2], dim=1))
        d1 = self.dec1(torch.cat([up(d2, e1), e1], dim=1))
        return self.out(d1)


def fuse_features(
    rgb_taps: list[torch.Tensor], depth_taps: list[torch.Tensor]
) -> torch.Tensor:
    """Bilinearly upsample all taps to the largest spatial size and concatenate
    along channels; channel count is the sum over all contributing blocks."""
    taps = list(rgb_taps) + list(depth_taps)
    if not taps:
        raise ValueError("no feature taps to fuse")
    target = max((t.shape[-2], t.shape[-1]) for t in taps)
    aligned = [
        t
        if (t.shape[-2], t.shape[-1]) == target
        else F.interpolate(t, size=target, mode="bilinear", align_corners=False)
        for t in taps
    ]
    return torch.cat(aligned, dim=1)


def fused_channels(base: int) -> int:
    # e1 + e2 + d2 + d1 per reconstructor, two reconstructors
    return 2 * (base + 2 * base + base + base)


class AnomalyDetector(nn.Module):
    """The full assembly: two reconstructors plus the dual-modal discriminator."""

    def __init__(self, base: int = 8):
        super().__init__()
        self.rec_rgb = ReconstructionUNet(3, base)
        self.rec_depth = ReconstructionUNet(1, base)
        self.disc = DiscriminatorUNet(fused_channels(base), base * 2)

    def forward(
        self, rgb_aug: torch.Tensor, depth_aug: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Returns (rgb reconstruction, depth reconstruction, mask logits)."""
        rgb_rec, rgb_taps = self.rec_rgb(rgb_aug)
        depth_rec, depth_taps = self.rec_depth(depth_aug)
        fused = fuse_features(rgb_taps, depth_taps)
        logits = self.disc(fused)
        return rgb_rec, depth_rec, logits
