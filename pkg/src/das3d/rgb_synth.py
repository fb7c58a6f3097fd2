"""RGB-side anomaly synthesis: texture sampling and masked texture mixing.

The RGB defect is painted only where the refined depth mask is set, so the
two modalities stay aligned by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import (
    DimensionMismatchError,
    ImageFormatError,
    RgbImage,
    load_rgb,
    resize,
)

_TEXTURE_SUFFIXES = (".png", ".jpg", ".jpeg")


class NoTexturesError(ValueError):
    """The texture directory contains no usable image files."""


class TextureLoadError(RuntimeError):
    """Every sampled texture file failed to load."""


@dataclass(frozen=True)
class TextureSource:
    """Immutable index over a directory tree of texture images."""

    root: Path
    index: tuple[str, ...] = field(default_factory=tuple)

    @classmethod
    def from_dir(cls, root) -> "TextureSource":
        root = Path(root)
        files = sorted(
            str(p) for p in root.rglob("*") if p.suffix.lower() in _TEXTURE_SUFFIXES
        )
        if not files:
            raise NoTexturesError(f"no texture images under {root}")
        return cls(root=root, index=tuple(files))


def sample_texture(
    src: TextureSource, rng: np.random.Generator, out_h: int, out_w: int
) -> tuple[RgbImage, str]:
    """Uniformly pick a texture file, load it and resize to (out_h, out_w).

    Unreadable files are skipped with a fresh draw; after every file has had
    a fair chance the function gives up with TextureLoadError.  Deterministic
    in the rng state; returns the image together with the chosen path.
    """
    if not src.index:
        raise NoTexturesError(f"texture index for {src.root} is empty")
    attempts = max(8, 3 * len(src.index))
    last_error: Exception | None = None
    for _ in range(attempts):
        path = src.index[int(rng.integers(len(src.index)))]
        try:
            return resize(load_rgb(path), out_h, out_w), path
        except (ImageFormatError, FileNotFoundError, OSError) as exc:
            last_error = exc
    raise TextureLoadError(
        f"could not load any texture from {src.root} after {attempts} draws"
    ) from last_error


def augment_rgb(
    image: RgbImage, texture: RgbImage, mask, beta: float
) -> RgbImage:
    """Blend the texture into the image inside the mask.

    Inside the mask the pixel becomes (1-beta)*texture + beta*image; outside
    it stays bit-identical to the input.  beta in [0, 0.8] keeps at least a
    fifth of the texture visible.
    """
    if not 0.0 <= beta <= 0.8:
        raise ValueError(f"beta must lie in [0, 0.8], got {beta}")
    if image.values.shape != texture.values.shape:
        raise DimensionMismatchError(
            f"image/texture shapes differ: {image.values.shape} vs {texture.values.shape}"
        )
    m = mask.values
    if m.shape != image.values.shape[:2]:
        raise DimensionMismatchError(
            f"mask shape {m.shape} does not match image {image.values.shape[:2]}"
        )
    m3 = m.astype(np.float64)[:, :, None]
    mixed = (1.0 - beta) * texture.values + beta * image.values
    out = (1.0 - m3) * image.values + m3 * mixed
    # the blend is a convex combination; clip only sheds sub-ulp rounding
    # overshoot and leaves in-range pixels (all unmasked ones) bit-identical
    return RgbImage(np.clip(out, 0.0, 1.0))
