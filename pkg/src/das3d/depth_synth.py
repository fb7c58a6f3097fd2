"""Depth-side anomaly synthesis: foreground masking, placement-mask
composition, smoothed depth change, depth augmentation and mask refinement.

Sign convention: +1 placement regions raise depth values and -1 regions
lower them.  Whether a raised value renders as a concave dent or a convex
bump depends on the camera's depth convention; the mask sign is carried
through verbatim and not reinterpreted here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import BinaryMask, DepthImage, DimensionMismatchError, FloatMap, TernaryMask
from .skew_filter import SkewKernel, convolve

DEFAULT_FG_MARGIN = 1e-4


@dataclass(frozen=True)
class DepthAugParams:
    """Thresholds and magnitude range for depth augmentation.

    t_f: foreground depth threshold (None = per-image max minus a margin,
         which matches the preprocessing that fills background with the
         maximum remaining depth).
    t_p: ternarization threshold in (0, 1).
    t_h: mask refinement threshold on |depth change|.
    p_min, p_max: defect magnitude range for the sampled multiplier.
    """

    t_f: float | None = None
    t_p: float = 0.5
    t_h: float = 0.005
    p_min: float = 0.01
    p_max: float = 0.10

    def __post_init__(self):
        if not 0.0 < self.p_min <= self.p_max:
            raise ValueError(f"need 0 < p_min <= p_max, got ({self.p_min}, {self.p_max})")
        if self.t_h <= 0.0:
            raise ValueError(f"t_h must be positive, got {self.t_h}")
        if not 0.0 < self.t_p < 1.0:
            raise ValueError(f"t_p must lie in (0, 1), got {self.t_p}")


def default_foreground_threshold(depth: DepthImage) -> float:
    """Background is filled to the image maximum, so anything strictly nearer
    than (max - margin) counts as foreground."""
    return float(depth.values.max()) - DEFAULT_FG_MARGIN


def foreground_mask(depth: DepthImage, t_f: float) -> BinaryMask:
    """Mask of pixels strictly nearer than t_f (1 = foreground)."""
    return BinaryMask((depth.values < t_f).astype(np.uint8))


def compose_mask(fg: BinaryMask, placement: TernaryMask) -> TernaryMask:
    """Element-wise product: keeps placement values on foreground, zeroes
    every background pixel."""
    if fg.values.shape != placement.values.shape:
        raise DimensionMismatchError(
            f"mask shapes differ: {fg.values.shape} vs {placement.values.shape}"
        )
    return TernaryMask(fg.values.astype(np.int8) * placement.values)


def delta_depth(placement: TernaryMask, kernel: SkewKernel) -> FloatMap:
    """Smooth the placement mask into a continuous depth change in [-1, 1]."""
    return convolve(placement, kernel)


def augment_depth(depth: DepthImage, delta: FloatMap, p_z: float) -> DepthImage:
    """Add the scaled depth change and clamp back into [0, 1].

    Clamping keeps the DepthImage invariant; the unclamped p_z*delta is what
    the refined mask is computed from, so callers that need the pre-clamp
    change must retain it separately.
    """
    if depth.values.shape != delta.values.shape:
        raise DimensionMismatchError(
            f"shapes differ: {depth.values.shape} vs {delta.values.shape}"
        )
    return DepthImage(np.clip(depth.values + p_z * delta.values, 0.0, 1.0))


def refine_mask(delta: FloatMap, p_z: float, t_h: float) -> BinaryMask:
    """Anomaly ground truth: 1 wherever |p_z * delta| reaches t_h, else 0."""
    if t_h <= 0.0:
        raise ValueError(f"t_h must be positive, got {t_h}")
    return BinaryMask((p_z * np.abs(delta.values) >= t_h).astype(np.uint8))
