"""Dataset over a synthesized tree plus its source normals.

Each item pairs the augmented sample (input to the networks) with its normal
counterpart (reconstruction target) and the anomaly mask (discriminator
target).  Samples whose both modalities were dropped carry empty masks and
act as normal training examples.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

from .fileio import load_manifest, read_mask, read_pfm, read_rgb


class SynthPairDataset(Dataset):
    def __init__(self, synth_root, normals_root):
        self.synth_root = Path(synth_root)
        self.normals_root = Path(normals_root)
        manifest = load_manifest(synth_root)
        self.entries = manifest["samples"]
        if not self.entries:
            raise ValueError(f"empty dataset: {self.synth_root}")

    def __len__(self) -> int:
        return len(self.entries)

    def source_paths(self, entry: dict) -> dict:
        src = entry["meta"]["source"]
        cat = src.get("category", "")
        base = self.normals_root / cat if cat else self.normals_root
        return {key: base / src[key] for key in ("rgb", "depth", "fg")}

    def __getitem__(self, idx: int):
        entry = self.entries[idx]
        files = entry["files"]
        src = self.source_paths(entry)
        rgb_aug = read_rgb(self.synth_root / files["rgb"])
        depth_aug = read_pfm(self.synth_root / files["depth"])[None]
        mask = read_mask(self.synth_root / files["mask"])[None]
        rgb_n = read_rgb(src["rgb"])
        depth_n = read_pfm(src["depth"])[None]
        return {
            "rgb_aug": torch.from_numpy(rgb_aug),
            "depth_aug": torch.from_numpy(np.ascontiguousarray(depth_aug)),
            "rgb": torch.from_numpy(rgb_n),
            "depth": torch.from_numpy(np.ascontiguousarray(depth_n)),
            "mask": torch.from_numpy(np.ascontiguousarray(mask)),
        }
