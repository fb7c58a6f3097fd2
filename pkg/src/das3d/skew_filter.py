"""Skew-Gaussian smoothing filter: density, kernel discretization, convolution.

The filter is the 2-D skew normal density 2*phi2(x; 0, Sigma)*Phi(alpha.x)
discretized on an odd square grid and normalized to unit sum.  Convolving a
{-1, 0, 1} placement mask with it turns hard-edged regions into smooth
concave/convex depth changes whose shape is steered by alpha and Sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .imaging import BinaryMask, FloatMap, TernaryMask


class KernelTooLargeError(ValueError):
    """Kernel support exceeds the allowed size; clamp Sigma and retry."""

    def __init__(self, size: int, max_size: int):
        super().__init__(f"kernel size {size} exceeds maximum {max_size}")
        self.size = size
        self.max_size = max_size


@dataclass(frozen=True, eq=False)
class SkewParams:
    """Skew coefficients alpha (2-vector) and covariance Sigma (2x2 SPD)."""

    alpha: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if alpha.shape != (2,) or not np.all(np.isfinite(alpha)):
            raise ValueError(f"alpha must be a finite 2-vector, got {self.alpha!r}")
        if sigma.shape != (2, 2) or not np.all(np.isfinite(sigma)):
            raise ValueError(f"sigma must be a finite 2x2 matrix, got {self.sigma!r}")
        if abs(sigma[0, 1] - sigma[1, 0]) > 1e-12 * max(1.0, np.abs(sigma).max()):
            raise ValueError("sigma must be symmetric")
        if np.linalg.eigvalsh(sigma).min() <= 0.0:
            raise ValueError("sigma must be positive definite")
        alpha.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def isotropic(cls, alpha_y: float, alpha_x: float, sigma: float) -> "SkewParams":
        return cls(np.array([alpha_y, alpha_x]), np.diag([sigma**2, sigma**2]))


@dataclass(frozen=True, eq=False)
class SkewKernel:
    """Odd square kernel of non-negative weights summing to 1.

    Weights are normalized so that accumulating them in this module's fixed
    tap order (row-major with the center tap last) sums to exactly 1.0 in
    float64; convolution therefore preserves plateau amplitudes exactly.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"kernel must be square, got shape {w.shape}")
        if w.shape[0] % 2 != 1:
            raise ValueError(f"kernel size must be odd, got {w.shape[0]}")
        if w.min() < 0.0:
            raise ValueError("kernel weights must be non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError(f"kernel weights must sum to 1, got {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_weights(cls, raw: np.ndarray) -> "SkewKernel":
        """Normalize arbitrary non-negative weights into a sum-1 kernel."""
        w = np.asarray(raw, dtype=np.float64).copy()
        total = float(w.sum())
        if not np.isfinite(total) or total <= 0.0:
            raise ValueError("kernel weights must have a positive finite sum")
        w /= total
        _exactify_sum(w)
        return cls(w)


def _tap_order(h: int) -> list[tuple[int, int]]:
    # row-major taps with the center moved to the end; shared by kernel
    # normalization and convolve so plateau sums hit exactly 1.0
    c = h // 2
    taps = [(u, v) for u in range(h) for v in range(h) if (u, v) != (c, c)]
    taps.append((c, c))
    return taps


def _exactify_sum(w: np.ndarray) -> None:
    # fold all non-center taps, then set the center weight to 1 - prefix;
    # the final rounded add lands on exactly 1.0 (error is at most half an
    # ulp of 1, which rounds to even)
    h = w.shape[0]
    c = h // 2
    acc = 0.0
    for u, v in _tap_order(h)[:-1]:
        acc += w[u, v]
    center = 1.0 - acc
    if center <= 0.0:
        raise ValueError("degenerate kernel: center weight would be non-positive")
    w[c, c] = center


def skew_pdf(x: np.ndarray, params: SkewParams) -> np.ndarray:
    """Skew normal density 2*phi2(x; 0, Sigma)*Phi(alpha.x) at points x.

    x has shape (2,) or (..., 2); the result is scalar or shaped (...,).
    Strictly positive for finite x.
    """
    x = np.asarray(x, dtype=np.float64)
    scalar = x.shape == (2,)
    pts = np.atleast_2d(x)
    sigma = params.sigma
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    inv = np.array(
        [[sigma[1, 1], -sigma[0, 1]], [-sigma[1, 0], sigma[0, 0]]]
    ) / det
    quad = np.einsum("...i,ij,...j->...", pts, inv, pts)
    density = np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det))
    skew = ndtr(pts @ params.alpha)
    out = 2.0 * density * skew
    return float(out[0]) if scalar else out.reshape(x.shape[:-1])


def kernel_size(params: SkewParams) -> int:
    """Smallest odd size covering 6 standard deviations of the widest axis."""
    lam_max = float(np.linalg.eigvalsh(params.sigma).max())
    h = int(np.ceil(6.0 * np.sqrt(lam_max)))
    if h % 2 == 0:
        h += 1
    return max(h, 1)


def build_kernel(params: SkewParams, max_size: int | None = None) -> SkewKernel:
    """Discretize the skew density on an odd grid and normalize to sum 1.

    weights[i, j] = skew_pdf((i - h//2, j - h//2)) with h from
    :func:`kernel_size`.  Raises KernelTooLargeError when h exceeds max_size
    so callers can clamp Sigma.
    """
    h = kernel_size(params)
    if max_size is not None and h > max_size:
        raise KernelTooLargeError(h, max_size)
    c = h // 2
    offsets = np.arange(h, dtype=np.float64) - c
    grid = np.stack(np.meshgrid(offsets, offsets, indexing="ij"), axis=-1)
    raw = skew_pdf(grid, params)
    return SkewKernel.from_weights(raw)


def convolve(image: TernaryMask | FloatMap | BinaryMask, kernel: SkewKernel) -> FloatMap:
    """2-D convolution with zero padding; output matches the input size.

    A single +/-1 impulse reproduces the kernel weights verbatim around the
    impulse, and interiors of +/-1 plateaus come out exactly +/-1.
    """
    src = image.values.astype(np.float64)
    hgt, wid = src.shape
    h = kernel.size
    if h > min(hgt, wid):
        raise ValueError(f"kernel size {h} exceeds map size {hgt}x{wid}")
    c = h // 2
    padded = np.zeros((hgt + 2 * c, wid + 2 * c), dtype=np.float64)
    padded[c : c + hgt, c : c + wid] = src
    out = np.zeros((hgt, wid), dtype=np.float64)
    tmp = np.empty_like(out)
    w = kernel.weights
    for u, v in _tap_order(h):
        view = padded[2 * c - u : 2 * c - u + hgt, 2 * c - v : 2 * c - v + wid]
        np.multiply(view, w[u, v], out=tmp)
        np.add(out, tmp, out=out)
    return FloatMap(out)
