"""Core image and mask value types plus file I/O, resizing and normalization.

All in-memory pixel data is float64 (images/maps), uint8 (binary masks) or
int8 (ternary masks).  Arrays inside the value types are frozen after
construction, so instances are safe to share across workers.

On-disk formats:

* RGB images: standard 8-bit RGB PNG.
* Depth / float maps: single-channel float32 PFM, header
  ``Pf\\n<w> <h>\\n<scale>\\n`` followed by ``w*h`` float32 values in
  row-major order; a negative scale marks little-endian data.  A raw
  float32 file with a JSON sidecar (``{"height": H, "width": W,
  "dtype": "f32"}``) is accepted as a fallback.
* Binary masks: 8-bit grayscale PNG with values {0, 255}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import cv2
import numpy as np
from PIL import Image, UnidentifiedImageError


class ImagingError(ValueError):
    """Base class for image format and value errors."""


class ImageFormatError(ImagingError):
    """File exists but cannot be decoded as the expected format."""


class ChannelCountError(ImageFormatError):
    """Decoded image does not have the expected number of channels."""


class ConstantInputError(ImagingError):
    """Normalization is undefined because the input has a single value."""


class DimensionMismatchError(ImagingError):
    """Operands do not share the same spatial dimensions."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RgbImage:
    """An (H, W, 3) float64 image with all values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ChannelCountError(f"expected (H, W, 3) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ImagingError("RgbImage values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ImagingError("RgbImage values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class DepthImage:
    """An (H, W) float64 normalized depth map with values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ImagingError(f"expected (H, W) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ImagingError("DepthImage values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ImagingError(
                "DepthImage values must lie in [0, 1]; normalize raw depth first"
            )
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """An (H, W) uint8 mask whose values are exactly 0 or 1."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise ImagingError(f"expected (H, W) array, got shape {arr.shape}")
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        else:
            uniq = np.unique(arr)
            if not np.isin(uniq, (0, 1)).all():
                raise ImagingError(f"BinaryMask values must be 0/1, got {uniq}")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]

    def any(self) -> bool:
        return bool(self.values.any())


@dataclass(frozen=True, eq=False)
class TernaryMask:
    """An (H, W) int8 mask whose values are -1, 0 or 1."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise ImagingError(f"expected (H, W) array, got shape {arr.shape}")
        uniq = np.unique(arr)
        if not np.isin(uniq, (-1, 0, 1)).all():
            raise ImagingError(f"TernaryMask values must be in {{-1, 0, 1}}, got {uniq}")
        object.__setattr__(self, "values", _freeze(arr.astype(np.int8)))

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class FloatMap:
    """An (H, W) float64 map of finite, otherwise unconstrained values."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ImagingError(f"expected (H, W) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ImagingError("FloatMap values must be finite")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NormalizationRecord:
    """Per-image (min, max) used by :func:`normalize_depth`, for inversion."""

    lo: float
    hi: float


ImageKind = Union[RgbImage, DepthImage, BinaryMask, TernaryMask, FloatMap]


# ---------------------------------------------------------------------------
# PNG I/O


def load_rgb(path) -> RgbImage:
    """Load an 8-bit 3-channel PNG as an RgbImage with values byte/255.

    Raises FileNotFoundError for a missing file, ImageFormatError for an
    undecodable file and ChannelCountError when the channel count is not 3.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            arr = np.asarray(img)
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"cannot decode {path}: {exc}") from exc
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if mode != "RGB" or arr.ndim != 3 or arr.shape[2] != 3:
        raise ChannelCountError(f"{path}: expected 3-channel RGB, got mode {mode!r}")
    return RgbImage(arr.astype(np.float64) / 255.0)


def save_rgb(image: RgbImage, path) -> None:
    """Write an RgbImage as an 8-bit RGB PNG (values rounded to bytes)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.rint(image.values * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


def load_mask(path) -> BinaryMask:
    """Load an 8-bit grayscale PNG as a BinaryMask (values > 127 become 1)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such mask file: {path}")
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"))
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"cannot decode {path}: {exc}") from exc
    return BinaryMask((arr > 127).astype(np.uint8))


def save_mask(mask: BinaryMask, path) -> None:
    """Write a BinaryMask as an 8-bit grayscale PNG with values {0, 255}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask.values * np.uint8(255), mode="L").save(path, format="PNG")


# ---------------------------------------------------------------------------
# PFM / raw float I/O


def write_pfm(path, values: np.ndarray) -> None:
    """Write a 2-D float array as a little-endian single-channel PFM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ImagingError(f"PFM requires a 2-D array, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a single-channel PFM written row-major; returns float32 (H, W)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such PFM file: {path}")
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip()
        if magic != b"Pf":
            raise ImageFormatError(f"{path}: bad PFM magic {magic!r} (want b'Pf')")
        try:
            dims = fh.readline().split()
            w, h = int(dims[0]), int(dims[1])
            scale = float(fh.readline())
        except (ValueError, IndexError) as exc:
            raise ImageFormatError(f"{path}: malformed PFM header") from exc
        dtype = "<f4" if scale < 0 else ">f4"
        data = fh.read(4 * w * h)
        if len(data) != 4 * w * h:
            raise ImageFormatError(
                f"{path}: truncated PFM payload ({len(data)} bytes for {w}x{h})"
            )
    return np.frombuffer(data, dtype=dtype).reshape(h, w).astype(np.float32)


def _read_raw_float(path) -> np.ndarray:
    sidecar = Path(path).with_suffix(".json")
    if not sidecar.is_file():
        raise FileNotFoundError(f"raw float file {path} needs a JSON sidecar {sidecar}")
    header = json.loads(sidecar.read_text())
    if header.get("dtype") != "f32":
        raise ImageFormatError(f"{sidecar}: unsupported dtype {header.get('dtype')!r}")
    h, w = int(header["height"]), int(header["width"])
    data = Path(path).read_bytes()
    if len(data) != 4 * h * w:
        raise ImageFormatError(f"{path}: size does not match {h}x{w} float32 header")
    return np.frombuffer(data, dtype="<f4").reshape(h, w).astype(np.float32)


def load_float_map(path) -> FloatMap:
    """Load a PFM or raw-float file verbatim, without range checks."""
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        return FloatMap(read_pfm(path).astype(np.float64))
    return FloatMap(_read_raw_float(path).astype(np.float64))


def load_depth(path) -> DepthImage:
    """Load a normalized depth map from PFM (or raw float + JSON sidecar).

    The stored values are read verbatim; they must already lie in [0, 1].
    Raw scanner depth should be loaded with :func:`load_float_map` and passed
    through :func:`normalize_depth` first.
    """
    return DepthImage(load_float_map(path).values)


def save_depth(depth: DepthImage, path) -> None:
    """Write a DepthImage as float32 PFM; float32 data round-trips bit-exact."""
    write_pfm(path, depth.values)


# ---------------------------------------------------------------------------
# Resizing and normalization


def resize(image: ImageKind, out_h: int, out_w: int) -> ImageKind:
    """Resize to (out_h, out_w); bilinear for images/maps, nearest for masks.

    Nearest-neighbor on masks preserves the exact {0,1} / {-1,0,1} value sets.
    """
    if out_h < 1 or out_w < 1:
        raise ImagingError(f"target dimensions must be >= 1, got {out_h}x{out_w}")
    src = image.values
    if (src.shape[0], src.shape[1]) == (out_h, out_w):
        return type(image)(src.copy())
    if isinstance(image, (BinaryMask, TernaryMask)):
        out = cv2.resize(src, (out_w, out_h), interpolation=cv2.INTER_NEAREST)
        return type(image)(out)
    if isinstance(image, (RgbImage, DepthImage, FloatMap)):
        out = cv2.resize(src, (out_w, out_h), interpolation=cv2.INTER_LINEAR)
        return type(image)(out)
    raise TypeError(f"cannot resize {type(image).__name__}")


def normalize_depth(depth: FloatMap) -> tuple[DepthImage, NormalizationRecord]:
    """Affinely map a raw depth map onto [0, 1] using its own min/max.

    Returns the normalized image and the (min, max) record needed to invert
    the mapping.  A constant input has no defined scale and raises
    ConstantInputError; callers may substitute an all-0.5 image.
    """
    vals = depth.values
    lo = float(vals.min())
    hi = float(vals.max())
    if hi == lo:
        raise ConstantInputError(f"constant depth input (value {lo}); scale undefined")
    out = (vals - lo) / (hi - lo)
    return DepthImage(np.clip(out, 0.0, 1.0)), NormalizationRecord(lo, hi)


def denormalize_depth(depth: DepthImage, record: NormalizationRecord) -> FloatMap:
    """Invert :func:`normalize_depth` using the stored (min, max) record."""
    return FloatMap(depth.values * (record.hi - record.lo) + record.lo)
