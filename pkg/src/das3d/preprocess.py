"""Raw scan preprocessing: plane estimation, background removal, resizing
and depth normalization.

Input scans are (H, W, 3) XYZ point grids (3-channel float32 TIFF, or raw
float32 with a JSON sidecar) paired with RGB PNGs.  The background plane is
estimated with RANSAC; points within ``dist`` of it (and invalid points) are
removed.  Removed pixels get the maximum depth of the remaining points, so
after normalization the background sits at 1.0 and everything nearer is
foreground.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .imaging import (
    BinaryMask,
    ConstantInputError,
    DepthImage,
    FloatMap,
    ImageFormatError,
    NormalizationRecord,
    RgbImage,
    load_rgb,
    normalize_depth,
    resize,
    save_depth,
    save_mask,
    save_rgb,
)


class DegenerateGeometryError(ValueError):
    """Not enough non-collinear points to define a plane."""


class NoForegroundError(ValueError):
    """Every point was removed as background."""


@dataclass(frozen=True, eq=False)
class PointGrid:
    """Organized (H, W, 3) point cloud with a per-pixel validity flag.

    Pixels whose coordinates are NaN/inf or exactly (0, 0, 0) — scanner
    holes — are invalid and treated as background.
    """

    xyz: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64)
        validity = np.asarray(self.validity, dtype=bool)
        if xyz.ndim != 3 or xyz.shape[2] != 3:
            raise ValueError(f"xyz must be (H, W, 3), got {xyz.shape}")
        if validity.shape != xyz.shape[:2]:
            raise ValueError("validity shape must match xyz grid")
        if not np.all(np.isfinite(xyz[validity])):
            raise ValueError("valid points must have finite coordinates")
        xyz.setflags(write=False)
        validity.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "validity", validity)

    @classmethod
    def from_xyz(cls, xyz: np.ndarray) -> "PointGrid":
        xyz = np.asarray(xyz, dtype=np.float64)
        finite = np.all(np.isfinite(xyz), axis=2)
        nonzero = np.any(xyz != 0.0, axis=2)
        grid = np.where(finite[:, :, None], xyz, 0.0)
        return cls(grid, finite & nonzero)

    @property
    def h(self) -> int:
        return self.xyz.shape[0]

    @property
    def w(self) -> int:
        return self.xyz.shape[1]


@dataclass(frozen=True, eq=False)
class PlaneModel:
    """Plane {p : normal . p = offset} with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError(f"plane normal must be unit length, got norm {np.linalg.norm(n)}")
        n.setflags(write=False)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def distances(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points @ self.normal - self.offset)


def _canonicalize(normal: np.ndarray, offset: float) -> tuple[np.ndarray, float]:
    # fix the sign so the z-component (falling back to y, then x) is positive
    for axis in (2, 1, 0):
        if normal[axis] != 0.0:
            if normal[axis] > 0:
                return normal, offset
            return -normal, -offset
    raise DegenerateGeometryError("zero plane normal")


def count_inliers(grid: PointGrid, plane: PlaneModel, dist: float) -> int:
    pts = grid.xyz[grid.validity]
    return int((plane.distances(pts) <= dist).sum())


def ransac_plane(
    grid: PointGrid, dist: float = 0.005, iters: int = 500, seed: int = 0
) -> PlaneModel:
    """Estimate the dominant plane from random 3-point hypotheses.

    The hypothesis with the most inliers (|normal . p - offset| <= dist) is
    refined by a least-squares fit over its inliers.  Deterministic in seed;
    the returned normal has its sign canonicalized (positive z when nonzero).
    """
    pts = grid.xyz[grid.validity]
    if pts.shape[0] < 3:
        raise DegenerateGeometryError(f"need >= 3 valid points, got {pts.shape[0]}")
    rng = np.random.default_rng(seed)
    scale = float(np.abs(pts).max()) or 1.0
    best_normal = None
    best_offset = 0.0
    best_count = -1
    for _ in range(iters):
        idx = rng.choice(pts.shape[0], size=3, replace=False)
        p1, p2, p3 = pts[idx]
        n = np.cross(p2 - p1, p3 - p1)
        nn = np.linalg.norm(n)
        if nn <= 1e-12 * scale * scale:
            continue  # collinear triple
        n = n / nn
        d = float(n @ p1)
        count = int((np.abs(pts @ n - d) <= dist).sum())
        if count > best_count:
            best_count = count
            best_normal = n
            best_offset = d
    if best_normal is None:
        raise DegenerateGeometryError("all sampled triples were collinear")

    inliers = pts[np.abs(pts @ best_normal - best_offset) <= dist]
    if inliers.shape[0] >= 3:
        centroid = inliers.mean(axis=0)
        _, _, vt = np.linalg.svd(inliers - centroid, full_matrices=False)
        normal = vt[-1]
        norm = np.linalg.norm(normal)
        if norm > 0:
            normal = normal / norm
            best_normal = normal
            best_offset = float(normal @ centroid)
    best_normal, best_offset = _canonicalize(best_normal, best_offset)
    return PlaneModel(best_normal, best_offset)


def remove_background(
    grid: PointGrid, rgb: RgbImage, plane: PlaneModel, dist: float = 0.005
) -> tuple[FloatMap, RgbImage, BinaryMask]:
    """Split the scan into foreground and plane background.

    Points within ``dist`` of the plane and invalid points are removed: their
    depth becomes the maximum depth among the remaining points and their RGB
    becomes 0.  Returns (raw depth map, masked RGB, foreground mask); the
    depth is in scanner units and still needs :func:`normalize_depth`.
    """
    if (grid.h, grid.w) != (rgb.h, rgb.w):
        raise ValueError(f"grid {grid.h}x{grid.w} and rgb {rgb.h}x{rgb.w} differ")
    near_plane = plane.distances(grid.xyz.reshape(-1, 3)).reshape(grid.h, grid.w) <= dist
    removed = near_plane | ~grid.validity
    remaining = ~removed
    if not remaining.any():
        raise NoForegroundError("background removal left no foreground points")
    depth = grid.xyz[:, :, 2].copy()
    fill = float(depth[remaining].max())
    depth[removed] = fill
    rgb_vals = rgb.values.copy()
    rgb_vals[removed] = 0.0
    return FloatMap(depth), RgbImage(rgb_vals), BinaryMask(remaining.astype(np.uint8))


# ---------------------------------------------------------------------------
# File-level drivers


def load_point_grid(path) -> PointGrid:
    """Load an XYZ grid from 3-channel float TIFF or raw float32 + sidecar."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such scan file: {path}")
    if path.suffix.lower() in (".tif", ".tiff"):
        arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if arr is None:
            raise ImageFormatError(f"cannot decode TIFF {path}")
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ImageFormatError(f"{path}: expected 3-channel XYZ TIFF, got {arr.shape}")
        return PointGrid.from_xyz(arr.astype(np.float64))
    sidecar = path.with_suffix(".json")
    if not sidecar.is_file():
        raise FileNotFoundError(f"raw scan {path} needs a JSON sidecar {sidecar}")
    header = json.loads(sidecar.read_text())
    h, w = int(header["height"]), int(header["width"])
    channels = int(header.get("channels", 3))
    if channels != 3 or header.get("dtype") != "f32":
        raise ImageFormatError(f"{sidecar}: expected 3-channel f32 header")
    data = np.frombuffer(path.read_bytes(), dtype="<f4")
    if data.size != h * w * 3:
        raise ImageFormatError(f"{path}: payload does not match {h}x{w}x3 header")
    return PointGrid.from_xyz(data.reshape(h, w, 3).astype(np.float64))


@dataclass(frozen=True)
class PreprocessResult:
    """Where the triple landed plus the normalization record for inversion."""

    rgb_path: Path
    depth_path: Path
    fg_path: Path
    record: NormalizationRecord


def preprocess_pair(
    xyz_path,
    rgb_path,
    out_dir,
    stem: str,
    out_size: int = 256,
    dist: float = 0.005,
    iters: int = 500,
    seed: int = 0,
    norm_bounds: tuple[float, float] | None = None,
) -> PreprocessResult:
    """Full per-pair chain: RANSAC -> background removal -> resize -> normalize.

    Writes rgb/<stem>.png, depth/<stem>.pfm and fg/<stem>.png under out_dir.
    norm_bounds overrides the per-image (min, max) for dataset-level
    normalization.
    """
    grid = load_point_grid(xyz_path)
    rgb = load_rgb(rgb_path)
    plane = ransac_plane(grid, dist=dist, iters=iters, seed=seed)
    depth_raw, rgb_cut, fg = remove_background(grid, rgb, plane, dist=dist)

    depth_raw = resize(depth_raw, out_size, out_size)
    rgb_cut = resize(rgb_cut, out_size, out_size)
    fg = resize(fg, out_size, out_size)

    if norm_bounds is not None:
        lo, hi = norm_bounds
        record = NormalizationRecord(lo, hi)
        if hi == lo:
            raise ConstantInputError("dataset normalization bounds are degenerate")
        depth = DepthImage(np.clip((depth_raw.values - lo) / (hi - lo), 0.0, 1.0))
    else:
        try:
            depth, record = normalize_depth(depth_raw)
        except ConstantInputError:
            # flat scan: no scale, fall back to mid-range
            value = float(depth_raw.values.reshape(-1)[0])
            depth = DepthImage(np.full_like(depth_raw.values, 0.5))
            record = NormalizationRecord(value, value)

    out_dir = Path(out_dir)
    res = PreprocessResult(
        rgb_path=out_dir / "rgb" / f"{stem}.png",
        depth_path=out_dir / "depth" / f"{stem}.pfm",
        fg_path=out_dir / "fg" / f"{stem}.png",
        record=record,
    )
    save_rgb(rgb_cut, res.rgb_path)
    save_depth(depth, res.depth_path)
    save_mask(fg, res.fg_path)
    return res


def discover_scan_pairs(input_dir) -> list[tuple[str, Path, Path]]:
    """Find (stem, xyz_path, rgb_path) pairs under <input>/{xyz,rgb}/."""
    input_dir = Path(input_dir)
    xyz_dir = input_dir / "xyz"
    rgb_dir = input_dir / "rgb"
    pairs = []
    if not xyz_dir.is_dir():
        return pairs
    for xyz_path in sorted(xyz_dir.iterdir()):
        if xyz_path.suffix.lower() not in (".tif", ".tiff", ".f32", ".raw"):
            continue
        rgb_path = rgb_dir / f"{xyz_path.stem}.png"
        if not rgb_path.is_file():
            raise FileNotFoundError(f"missing RGB partner for {xyz_path}: {rgb_path}")
        pairs.append((xyz_path.stem, xyz_path, rgb_path))
    return pairs
