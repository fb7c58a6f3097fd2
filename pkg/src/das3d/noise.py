"""2-D gradient (Perlin) noise and ternarization into defect-placement masks.

The noise field drives where synthetic defects are planted: values below
``-t_p`` mark depth-decreasing regions (-1), values above ``t_p`` mark
depth-increasing regions (+1), everything else stays 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import FloatMap, TernaryMask

_ALLOWED_FREQS = (1, 2, 4, 8, 16, 32)


@dataclass(frozen=True)
class PerlinConfig:
    """Lattice layout and seed for one noise draw.

    freq_x / freq_y are lattice cell counts across the width / height and
    must be powers of two in [1, 32].
    """

    freq_x: int
    freq_y: int
    seed: int

    def __post_init__(self):
        for name, f in (("freq_x", self.freq_x), ("freq_y", self.freq_y)):
            if f not in _ALLOWED_FREQS:
                raise ValueError(f"{name} must be a power of two in [1, 32], got {f}")


def _fade(t: np.ndarray) -> np.ndarray:
    # quintic fade 6t^5 - 15t^4 + 10t^3
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _raw_perlin(h: int, w: int, cfg: PerlinConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(cfg.freq_y + 1, cfg.freq_x + 1))
    gy = np.sin(angles)
    gx = np.cos(angles)

    # lattice coordinates of each pixel; integer numerators keep exact lattice
    # hits exact (e.g. row 16 of 64 at freq 4 lands on node 1.0)
    ys = (np.arange(h) * cfg.freq_y) / h
    xs = (np.arange(w) * cfg.freq_x) / w
    iy = ys.astype(np.int64)
    ix = xs.astype(np.int64)
    fy = (ys - iy)[:, None]
    fx = (xs - ix)[None, :]

    # dot products of corner gradients with the offset vector to each pixel
    def dot(dy: int, dx: int) -> np.ndarray:
        g_y = gy[np.ix_(iy + dy, ix + dx)]
        g_x = gx[np.ix_(iy + dy, ix + dx)]
        return g_y * (fy - dy) + g_x * (fx - dx)

    n00 = dot(0, 0)
    n01 = dot(0, 1)
    n10 = dot(1, 0)
    n11 = dot(1, 1)

    uy = _fade(fy)
    ux = _fade(fx)
    top = n00 + ux * (n01 - n00)
    bot = n10 + ux * (n11 - n10)
    return top + uy * (bot - top)


def perlin2d(h: int, w: int, cfg: PerlinConfig) -> FloatMap:
    """Classic 2-D gradient noise on a freq_x-by-freq_y lattice.

    The raw field is rescaled symmetrically by 1/max|value| so the output
    lies in [-1, 1] with zeros (in particular lattice nodes) preserved.
    Fully deterministic in cfg.
    """
    if h < 2 or w < 2:
        raise ValueError(f"image dimensions must be >= 2, got {h}x{w}")
    if cfg.freq_x > min(h, w) or cfg.freq_y > min(h, w):
        raise ValueError(
            f"lattice frequencies ({cfg.freq_x}, {cfg.freq_y}) exceed min(h, w)={min(h, w)}"
        )
    raw = _raw_perlin(h, w, cfg)
    peak = np.abs(raw).max()
    if peak > 0.0:
        raw = raw / peak
    return FloatMap(raw)


def ternarize(noise: FloatMap, t_p: float) -> TernaryMask:
    """Threshold a noise field in [-1, 1] into a {-1, 0, 1} placement mask.

    Strict inequalities: -1 where value < -t_p, +1 where value > t_p,
    otherwise 0 (values exactly at +/-t_p stay 0).
    """
    if not 0.0 < t_p < 1.0:
        raise ValueError(f"t_p must lie strictly inside (0, 1), got {t_p}")
    vals = noise.values
    if np.abs(vals).max() > 1.0:
        raise ValueError("noise values must lie in [-1, 1]")
    out = np.zeros(vals.shape, dtype=np.int8)
    out[vals < -t_p] = -1
    out[vals > t_p] = 1
    return TernaryMask(out)
