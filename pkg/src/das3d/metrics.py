"""Image- and pixel-level anomaly detection metrics.

* image AUROC: rank statistic with midrank tie handling, so it equals
  P(score_pos > score_neg) + 0.5 * P(tie).
* pixel AUROC: the same statistic over all pixels of all images pooled.
* AUPRO: per-region overlap averaged over ground-truth connected
  components, integrated over the false-positive rate up to a limit and
  normalized by that limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.stats import rankdata

from .imaging import BinaryMask, DimensionMismatchError, FloatMap


class SingleClassError(ValueError):
    """AUROC is undefined unless both classes are present."""


class NoComponentsError(ValueError):
    """AUPRO is undefined without at least one ground-truth component."""


@dataclass(frozen=True)
class ScoredImages:
    """Image-level scores with 0/1 anomaly labels."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        labels = np.asarray(self.labels).reshape(-1)
        if scores.shape != labels.shape:
            raise DimensionMismatchError(
                f"scores/labels lengths differ: {scores.size} vs {labels.size}"
            )
        if not np.isin(np.unique(labels), (0, 1)).all():
            raise ValueError("labels must be 0/1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels.astype(np.uint8))


@dataclass(frozen=True)
class PixelEval:
    """Paired anomaly score maps and ground-truth masks."""

    maps: tuple[FloatMap, ...]
    gts: tuple[BinaryMask, ...]

    def __post_init__(self):
        maps = tuple(self.maps)
        gts = tuple(self.gts)
        if len(maps) != len(gts):
            raise DimensionMismatchError("maps and gts must pair up")
        for i, (m, g) in enumerate(zip(maps, gts)):
            if m.values.shape != g.values.shape:
                raise DimensionMismatchError(
                    f"pair {i}: map {m.values.shape} vs gt {g.values.shape}"
                )
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "gts", gts)


def _rank_auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError(
            f"need both classes for AUROC, got {n_pos} positive / {n_neg} negative"
        )
    ranks = rankdata(scores)  # midranks
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auroc(data: ScoredImages) -> float:
    """Image-level area under the ROC curve with midrank tie handling."""
    return _rank_auroc(data.scores, data.labels)


def pixel_auroc(data: PixelEval) -> float:
    """AUROC over all pixels of all images pooled together."""
    scores = np.concatenate([m.values.reshape(-1) for m in data.maps])
    labels = np.concatenate([g.values.reshape(-1) for g in data.gts])
    return _rank_auroc(scores, labels)


def connected_components(mask: BinaryMask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label maximal connected sets of 1-pixels; returns (labels, count).

    Labels are 1..count with 0 for background.  8-connectivity joins
    diagonal neighbours; 4-connectivity is available behind the flag.
    """
    if connectivity == 8:
        structure = np.ones((3, 3), dtype=np.int32)
    elif connectivity == 4:
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.int32)
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, count = ndimage.label(mask.values, structure=structure)
    return labels, int(count)


def pro_curve(
    data: PixelEval, connectivity: int = 8, bins: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(FPR, PRO) polyline swept over thresholds from high to low.

    The sweep visits every distinct score value (or `bins` evenly spaced
    thresholds when set, for large maps); prediction at threshold t is
    score >= t.  The curve starts at (0, 0) and ends at (1, 1).
    """
    comp_sizes: list[int] = []
    comp_ids_all = []
    scores_all = []
    neg_all = []
    next_id = 1
    for fmap, gt in zip(data.maps, data.gts):
        labels, count = connected_components(gt, connectivity=connectivity)
        ids = np.where(labels > 0, labels + (next_id - 1), 0)
        for comp in range(1, count + 1):
            comp_sizes.append(int((labels == comp).sum()))
        next_id += count
        comp_ids_all.append(ids.reshape(-1))
        scores_all.append(fmap.values.reshape(-1))
        neg_all.append((gt.values == 0).reshape(-1))
    n_comps = next_id - 1
    if n_comps == 0:
        raise NoComponentsError("ground truth contains no anomaly components")
    scores = np.concatenate(scores_all)
    comp_ids = np.concatenate(comp_ids_all)
    negatives = np.concatenate(neg_all)
    n_neg = int(negatives.sum())
    if n_neg == 0:
        raise ValueError("AUPRO needs at least one negative pixel")

    sizes = np.asarray(comp_sizes, dtype=np.float64)
    order = np.argsort(scores, kind="stable")[::-1]
    s_sorted = scores[order]
    ids_sorted = comp_ids[order]
    neg_sorted = negatives[order]
    n = s_sorted.size

    # each admitted pixel of component c adds 1/(C * size_c) to the PRO mean
    inc = np.zeros(n, dtype=np.float64)
    inside = ids_sorted > 0
    inc[inside] = 1.0 / (n_comps * sizes[ids_sorted[inside] - 1])
    pro_cum = np.cumsum(inc)
    fpr_cum = np.cumsum(neg_sorted.astype(np.float64)) / n_neg

    if bins is not None:
        lo, hi = float(scores.min()), float(scores.max())
        thresholds = np.linspace(hi, lo, bins)
        # number of pixels with score >= t, per threshold
        bounds = np.searchsorted(-s_sorted, -thresholds, side="right")
        bounds = bounds[bounds > 0]
    else:
        # last index of each run of equal scores, +1
        change = np.nonzero(np.diff(s_sorted))[0] + 1
        bounds = np.concatenate([change, [n]])

    fprs = np.concatenate([[0.0], fpr_cum[bounds - 1]])
    pros = np.concatenate([[0.0], pro_cum[bounds - 1]])
    return fprs, pros


def integrate_to_limit(fprs: np.ndarray, pros: np.ndarray, fpr_limit: float) -> float:
    """Trapezoid area under the (FPR, PRO) polyline on [0, fpr_limit],
    normalized by fpr_limit."""
    if not 0.0 < fpr_limit <= 1.0:
        raise ValueError(f"fpr_limit must lie in (0, 1], got {fpr_limit}")
    area = 0.0
    for i in range(1, len(fprs)):
        x0, x1 = fprs[i - 1], fprs[i]
        y0, y1 = pros[i - 1], pros[i]
        if x1 <= fpr_limit:
            area += 0.5 * (y0 + y1) * (x1 - x0)
            continue
        if x0 < fpr_limit:
            # cut the segment at the limit
            frac = (fpr_limit - x0) / (x1 - x0)
            y_at = y0 + frac * (y1 - y0)
            area += 0.5 * (y0 + y_at) * (fpr_limit - x0)
        break
    return area / fpr_limit


def aupro(
    data: PixelEval,
    fpr_limit: float = 0.3,
    connectivity: int = 8,
    bins: int | None = None,
) -> float:
    """Area under the per-region-overlap curve up to fpr_limit, normalized."""
    fprs, pros = pro_curve(data, connectivity=connectivity, bins=bins)
    return integrate_to_limit(fprs, pros, fpr_limit)
