import numpy as np
import pytest
from PIL import Image


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def write_png_rgb(path, arr_u8):
    """Write an (H, W, 3) uint8 array as RGB PNG."""
    Image.fromarray(arr_u8, mode="RGB").save(path, format="PNG")


def make_texture_dir(root, n=4, size=24, seed=0):
    """Create a tiny directory of procedural texture PNGs; returns the paths."""
    root.mkdir(parents=True, exist_ok=True)
    gen = np.random.default_rng(seed)
    paths = []
    for i in range(n):
        base = gen.integers(40, 220, size=3, dtype=np.uint8)
        tex = np.tile(base, (size, size, 1))
        stripes = (np.arange(size) // 4 % 2).astype(np.uint8) * 60
        tex = np.clip(tex.astype(np.int32) + stripes[None, :, None], 0, 255).astype(np.uint8)
        p = root / f"tex_{i}.png"
        write_png_rgb(p, tex)
        paths.append(p)
    return paths
