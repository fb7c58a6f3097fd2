from __future__ import annotations

from dataclasses import dataclass


@dataclass
class TrainConfig:
    """Hyperparameters for the toy reconstruct-and-discriminate run."""

    manifest: str | None = None  # synthesized dataset root (holds manifest.json)
    normals: str | None = None  # source normal dataset root
    image_size: int = 64
    epochs: int = 15
    batch_size: int = 8
    lr: float = 1e-3
    focal_gamma: float = 2.0
    ssim_window: int = 11
    base_width: int = 6
    seed: int = 0

    def __post_init__(self):
        positive = {
            "image_size": self.image_size,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "focal_gamma": self.focal_gamma,
            "ssim_window": self.ssim_window,
            "base_width": self.base_width,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.image_size < self.ssim_window:
            raise ValueError("image_size must be at least the SSIM window")
