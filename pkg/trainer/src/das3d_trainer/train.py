"""Joint training of the two reconstructors and the dual-modal discriminator."""

from __future__ import annotations

import logging
from dataclasses import asdict
from pathlib import Path

import torch
from torch.utils.data import DataLoader

from .config import TrainConfig
from .data import SynthPairDataset
from .losses import total_loss
from .models import AnomalyDetector

log = logging.getLogger("das3d_trainer")


def train(cfg: TrainConfig, checkpoint_path) -> dict:
    """Run the training loop; saves a checkpoint and returns the loss history.

    The history maps each loss term to its per-epoch means, so callers can
    check that all three terms are finite and that the discriminator term
    goes down over the toy run.
    """
    if cfg.manifest is None or cfg.normals is None:
        raise ValueError("TrainConfig.manifest and .normals are required")
    torch.manual_seed(cfg.seed)
    dataset = SynthPairDataset(cfg.manifest, cfg.normals)
    generator = torch.Generator().manual_seed(cfg.seed)
    loader = DataLoader(
        dataset,
        batch_size=cfg.batch_size,
        shuffle=True,
        generator=generator,
        num_workers=0,
        drop_last=False,
    )
    model = AnomalyDetector(base=cfg.base_width)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)

    history: dict = {"total": [], "rec_depth": [], "rec_rgb": [], "disc": []}
    for epoch in range(cfg.epochs):
        sums = {key: 0.0 for key in history}
        n_batches = 0
        for batch in loader:
            optimizer.zero_grad()
            rgb_rec, depth_rec, logits = model(batch["rgb_aug"], batch["depth_aug"])
            pred = torch.sigmoid(logits)
            loss, parts = total_loss(
                batch["depth"],
                depth_rec,
                batch["rgb"],
                rgb_rec,
                pred,
                batch["mask"],
                gamma=cfg.focal_gamma,
                window=cfg.ssim_window,
            )
            loss.backward()
            optimizer.step()
            sums["total"] += float(loss.detach())
            for key, value in parts.items():
                sums[key] += float(value.detach())
            n_batches += 1
        for key in history:
            history[key].append(sums[key] / n_batches)
        log.info(
            "epoch %d/%d total %.4f (rec_depth %.4f rec_rgb %.4f disc %.4f)",
            epoch + 1,
            cfg.epochs,
            history["total"][-1],
            history["rec_depth"][-1],
            history["rec_rgb"][-1],
            history["disc"][-1],
        )

    checkpoint_path = Path(checkpoint_path)
    checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {"model": model.state_dict(), "config": asdict(cfg), "history": history},
        checkpoint_path,
    )
    return history
