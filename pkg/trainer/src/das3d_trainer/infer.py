"""Inference: per-pixel anomaly maps plus an image-level score.

The image score is the maximum of the anomaly map after 21x21 mean
smoothing, which rewards spatially coherent detections over isolated noisy
pixels.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from torch.nn import functional as F

from .config import TrainConfig
from .fileio import read_pfm, read_rgb, write_pfm
from .models import AnomalyDetector

SMOOTH_WINDOW = 21


def load_checkpoint(path) -> tuple[AnomalyDetector, TrainConfig]:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    cfg = TrainConfig(**blob["config"])
    model = AnomalyDetector(base=cfg.base_width)
    model.load_state_dict(blob["model"])
    model.eval()
    return model, cfg


def image_score(amap: torch.Tensor) -> float:
    """Max of the mean-smoothed map; amap is (H, W) in [0, 1]."""
    x = amap[None, None]
    smoothed = F.avg_pool2d(
        x, SMOOTH_WINDOW, stride=1, padding=SMOOTH_WINDOW // 2, count_include_pad=False
    )
    return float(smoothed.max())


@torch.no_grad()
def predict(model: AnomalyDetector, rgb: np.ndarray, depth: np.ndarray) -> tuple[np.ndarray, float]:
    """Anomaly map in [0, 1] plus the image-level score.

    rgb is (3, H, W) float32 in [0, 1]; depth is (H, W) float32 in [0, 1].
    """
    model.eval()
    rgb_t = torch.from_numpy(np.ascontiguousarray(rgb))[None]
    depth_t = torch.from_numpy(np.ascontiguousarray(depth))[None, None]
    _, _, logits = model(rgb_t, depth_t)
    amap = torch.sigmoid(logits)[0, 0]
    return amap.numpy(), image_score(amap)


def predict_tree(
    model: AnomalyDetector,
    items: list[tuple[str, Path, Path]],
    pred_dir,
    category: str,
) -> dict:
    """Run inference over (stem, rgb_path, depth_path) items and write the
    evaluation layout: <pred>/<category>/<stem>.pfm plus scores.json."""
    pred_cat = Path(pred_dir) / category
    pred_cat.mkdir(parents=True, exist_ok=True)
    scores = {}
    for stem, rgb_path, depth_path in items:
        amap, score = predict(model, read_rgb(rgb_path), read_pfm(depth_path))
        write_pfm(pred_cat / f"{stem}.pfm", amap)
        scores[stem] = score
    (pred_cat / "scores.json").write_text(json.dumps(scores, indent=2, sort_keys=True))
    return scores
