#!/usr/bin/env python3
"""Generate a procedural toy dataset of anomaly-free dual-modal samples.

Each sample is a hemisphere-like bump on a flat plane (depth) paired with a
soft-textured RGB image.  Output follows the dataset layout consumed by
`das3d synthesize`:

    <out>/<category>/rgb/NNN.png
    <out>/<category>/depth/NNN.pfm
    <out>/<category>/fg/NNN.png

With --raw the script instead emits raw XYZ scans + RGB under
<out>/<category>/{xyz,rgb}/ for exercising `das3d preprocess`.

A small procedural texture bank for the RGB corruption step can be emitted
with --textures-out.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from das3d.imaging import BinaryMask, DepthImage, RgbImage, save_depth, save_mask, save_rgb
from PIL import Image


def toy_surface(size: int, rng: np.random.Generator):
    """Height field (0 = plane) and footprint of a randomized bump."""
    ys, xs = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    cy = size / 2 + rng.uniform(-size * 0.08, size * 0.08)
    cx = size / 2 + rng.uniform(-size * 0.08, size * 0.08)
    radius = size * rng.uniform(0.3, 0.42)
    squash = rng.uniform(0.8, 1.25)
    d2 = ((ys - cy) * squash) ** 2 + (xs - cx) ** 2
    inside = d2 <= radius**2
    height = np.zeros((size, size))
    height[inside] = np.sqrt(np.clip(radius**2 - d2[inside], 0.0, None)) / radius
    return height, inside


def toy_rgb(size: int, inside: np.ndarray, rng: np.random.Generator) -> RgbImage:
    """Mildly varied base color on the object, dark background."""
    base = np.array([0.45, 0.42, 0.38]) + rng.uniform(-0.06, 0.06, size=3)
    img = np.zeros((size, size, 3))
    shading = 0.9 + 0.1 * rng.random((size, size, 1))
    img[:] = base[None, None, :]
    img *= shading
    img[~inside] = 0.0
    return RgbImage(np.clip(img, 0.0, 1.0))


def write_triple(out_dir: Path, stem: str, size: int, rng: np.random.Generator) -> None:
    height, inside = toy_surface(size, rng)
    depth = 1.0 - 0.6 * height  # background (plane) at max depth 1.0
    depth = depth.astype(np.float32).astype(np.float64)
    save_rgb(toy_rgb(size, inside, rng), out_dir / "rgb" / f"{stem}.png")
    save_depth(DepthImage(depth), out_dir / "depth" / f"{stem}.pfm")
    save_mask(BinaryMask(inside.astype(np.uint8)), out_dir / "fg" / f"{stem}.png")


def write_raw_scan(out_dir: Path, stem: str, size: int, rng: np.random.Generator) -> None:
    import json

    height, inside = toy_surface(size, rng)
    ys, xs = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64), indexing="ij")
    xyz = np.stack([xs * 0.002, ys * 0.002, 0.5 - 0.05 * height], axis=2)
    raw = out_dir / "xyz" / f"{stem}.f32"
    raw.parent.mkdir(parents=True, exist_ok=True)
    raw.write_bytes(xyz.astype("<f4").tobytes())
    raw.with_suffix(".json").write_text(
        json.dumps({"height": size, "width": size, "channels": 3, "dtype": "f32"})
    )
    rgb = toy_rgb(size, inside, rng)
    save_rgb(rgb, out_dir / "rgb" / f"{stem}.png")


def make_textures(out_dir: Path, count: int, size: int, seed: int) -> None:
    """Procedural texture bank: stripes, checkers, blobs and gradients."""
    rng = np.random.default_rng(seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        kind = i % 4
        c1 = rng.uniform(0.1, 0.9, size=3)
        c2 = rng.uniform(0.1, 0.9, size=3)
        ys, xs = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
        if kind == 0:
            period = int(rng.integers(3, 8))
            pattern = (xs // period) % 2
        elif kind == 1:
            period = int(rng.integers(3, 8))
            pattern = ((xs // period) + (ys // period)) % 2
        elif kind == 2:
            freq = rng.uniform(0.15, 0.5)
            pattern = (np.sin(freq * xs + rng.uniform(0, 6)) * np.sin(freq * ys) > 0).astype(int)
        else:
            pattern = ((xs + ys) / (2 * size))
        mix = np.asarray(pattern, dtype=np.float64)[:, :, None]
        img = c1[None, None, :] * (1 - mix) + c2[None, None, :] * mix
        arr = np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)
        Image.fromarray(arr, mode="RGB").save(out_dir / f"texture_{i:03d}.png")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output dataset root")
    parser.add_argument("--count", type=int, default=20)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--category", default="toy")
    parser.add_argument("--raw", action="store_true", help="emit raw XYZ scans instead of triples")
    parser.add_argument("--textures-out", default=None, help="also emit a texture bank here")
    parser.add_argument("--texture-count", type=int, default=12)
    args = parser.parse_args(argv)

    out = Path(args.out) / args.category
    for i in range(args.count):
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, i]))
        if args.raw:
            write_raw_scan(out, f"{i:03d}", args.size, rng)
        else:
            write_triple(out, f"{i:03d}", args.size, rng)
    if args.textures_out:
        make_textures(Path(args.textures_out), args.texture_count, args.size, args.seed + 1)
    print(f"wrote {args.count} samples under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
