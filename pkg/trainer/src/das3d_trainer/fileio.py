"""Readers/writers for the dataset interchange formats.

The trainer talks to the synthesis toolkit purely through files: PFM depth
and score maps (header ``Pf\\n<w> <h>\\n<scale>\\n``, row-major float32,
negative scale = little-endian), 8-bit PNGs, binary mask PNGs with values
{0, 255}, and the dataset manifest.json.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.readline().rstrip() != b"Pf":
            raise ValueError(f"{path}: not a single-channel PFM")
        w, h = (int(t) for t in fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = fh.read(4 * w * h)
    if len(data) != 4 * w * h:
        raise ValueError(f"{path}: truncated PFM payload")
    return np.frombuffer(data, dtype=dtype).reshape(h, w).astype(np.float32)


def write_pfm(path, values: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(values, dtype=np.float32)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_rgb(path) -> np.ndarray:
    """(3, H, W) float32 in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return arr.transpose(2, 0, 1)


def read_mask(path) -> np.ndarray:
    """(H, W) float32 in {0, 1}."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return (arr > 127).astype(np.float32)


def write_mask(path, mask: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = (np.asarray(mask) > 0.5).astype(np.uint8) * 255
    Image.fromarray(data, mode="L").save(path, format="PNG")


def load_manifest(synth_root) -> dict:
    return json.loads((Path(synth_root) / "manifest.json").read_text())
