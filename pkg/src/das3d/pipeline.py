"""Per-sample synthesis orchestration and deterministic dataset emission.

A sample is produced by: Perlin noise -> ternarize -> foreground compose ->
skew-filter convolution -> depth augmentation -> mask refinement -> RGB
texture mixing -> augmentation dropout.  Every random draw comes from one
per-sample rng stream derived from (master seed, category, pair, index), so
output trees are byte-identical regardless of worker count.

Dataset layout (both input and output mirror it):

    <root>/<category>/rgb/<stem>.png
    <root>/<category>/depth/<stem>.pfm
    <root>/<category>/fg/<stem>.png

plus, on the output side, mask/, delta/, meta/<id>.json and manifest.json.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .depth_synth import (
    DepthAugParams,
    augment_depth,
    compose_mask,
    delta_depth,
    refine_mask,
)
from .imaging import (
    BinaryMask,
    DepthImage,
    DimensionMismatchError,
    FloatMap,
    RgbImage,
    load_depth,
    load_mask,
    load_rgb,
    read_pfm,
    resize,
    save_depth,
    save_mask,
    save_rgb,
    write_pfm,
)
from .noise import PerlinConfig, perlin2d, ternarize
from .rgb_synth import TextureSource, augment_rgb, sample_texture
from .skew_filter import SkewParams, build_kernel

log = logging.getLogger("das3d")


class EmptyForegroundError(ValueError):
    """Synthesis needs at least one foreground pixel to plant a defect."""


class MissingPairMemberError(FileNotFoundError):
    """A pair in the dataset layout is missing one of rgb/depth/fg."""


@dataclass(frozen=True)
class SynthesisConfig:
    """All sampling ranges, thresholds and seeds for dataset synthesis."""

    depth: DepthAugParams = field(default_factory=DepthAugParams)
    alpha_low: float = -0.5
    alpha_high: float = 0.5
    alpha_component_wise: bool = True
    sigma_low: float = 4.0
    sigma_high: float = 16.0
    perlin_k_low: int = 0
    perlin_k_high: int = 4
    beta_low: float = 0.0
    beta_high: float = 0.8
    p_d: float = 0.25
    master_seed: int = 0
    samples_per_pair: int = 1
    max_retries: int = 10
    use_skew_filter: bool = True
    textures_root: str | None = None

    def __post_init__(self):
        for name in ("alpha", "sigma", "beta"):
            lo = getattr(self, f"{name}_low")
            hi = getattr(self, f"{name}_high")
            if lo > hi:
                raise ValueError(f"{name} range is reversed: ({lo}, {hi})")
        if not 0 <= self.perlin_k_low <= self.perlin_k_high <= 5:
            raise ValueError(
                f"perlin k range must satisfy 0 <= low <= high <= 5, "
                f"got ({self.perlin_k_low}, {self.perlin_k_high})"
            )
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError(f"p_d must lie in [0, 1], got {self.p_d}")
        if self.sigma_low <= 0.0:
            raise ValueError(f"sigma_low must be positive, got {self.sigma_low}")
        if self.samples_per_pair < 1:
            raise ValueError("samples_per_pair must be >= 1")
        if not (0.0 <= self.beta_low and self.beta_high <= 0.8):
            raise ValueError(
                f"beta range must stay within [0, 0.8], got ({self.beta_low}, {self.beta_high})"
            )

    def to_dict(self) -> dict:
        return {
            "depth": {
                "t_f": self.depth.t_f,
                "t_p": self.depth.t_p,
                "t_h": self.depth.t_h,
                "p_min": self.depth.p_min,
                "p_max": self.depth.p_max,
            },
            "alpha_low": self.alpha_low,
            "alpha_high": self.alpha_high,
            "alpha_component_wise": self.alpha_component_wise,
            "sigma_low": self.sigma_low,
            "sigma_high": self.sigma_high,
            "perlin_k_low": self.perlin_k_low,
            "perlin_k_high": self.perlin_k_high,
            "beta_low": self.beta_low,
            "beta_high": self.beta_high,
            "p_d": self.p_d,
            "master_seed": self.master_seed,
            "samples_per_pair": self.samples_per_pair,
            "max_retries": self.max_retries,
            "use_skew_filter": self.use_skew_filter,
            "textures": {"root": self.textures_root},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthesisConfig":
        data = dict(data)
        depth = DepthAugParams(**data.pop("depth", {}))
        textures = data.pop("textures", {})
        root = textures.get("root") if isinstance(textures, dict) else textures
        return cls(depth=depth, textures_root=root, **data)

    @classmethod
    def from_file(cls, path) -> "SynthesisConfig":
        path = Path(path)
        if path.suffix.lower() == ".json":
            return cls.from_dict(json.loads(path.read_text()))
        if path.suffix.lower() == ".toml":
            if sys.version_info >= (3, 11):
                import tomllib
            else:
                import tomli as tomllib
            return cls.from_dict(tomllib.loads(path.read_text()))
        raise ValueError(f"config file must be .json or .toml, got {path.suffix}")


@dataclass(frozen=True, eq=False)
class AnomalySample:
    """One synthetic dual-modal sample.

    delta holds the pre-clamp depth change p_z * Delta_Z (already multiplied
    by the magnitude, quantized to float32-representable values so the PFM
    on disk round-trips bit-exactly).  meta records every sampled parameter
    needed to regenerate the sample.
    """

    rgb: RgbImage
    depth: DepthImage
    mask: BinaryMask
    delta: FloatMap
    meta: dict

    def __post_init__(self):
        shape = self.depth.values.shape
        if self.rgb.values.shape[:2] != shape:
            raise DimensionMismatchError("rgb/depth dimensions differ")
        if self.mask.values.shape != shape or self.delta.values.shape != shape:
            raise DimensionMismatchError("mask/delta dimensions differ from images")
        if self.meta.get("d_i") == 1 and self.meta.get("d_z") == 1:
            if self.mask.values.any():
                raise ValueError("both modalities dropped but mask is non-empty")

    @property
    def anomalous(self) -> bool:
        return bool(self.mask.values.any())


def apply_dropout(
    rgb: RgbImage,
    rgb_aug: RgbImage,
    depth: DepthImage,
    depth_aug: DepthImage,
    mask: BinaryMask,
    d_i: int,
    d_z: int,
) -> tuple[RgbImage, DepthImage, BinaryMask]:
    """Revert one or both modalities to their normal version.

    Output is (d_i*rgb + (1-d_i)*rgb_aug, d_z*depth + (1-d_z)*depth_aug,
    (1 - d_i*d_z)*mask): the sample counts as normal only when both
    modalities were reverted.
    """
    if d_i not in (0, 1) or d_z not in (0, 1):
        raise ValueError(f"drop signals must be bits, got d_i={d_i}, d_z={d_z}")
    out_rgb = rgb if d_i == 1 else rgb_aug
    out_depth = depth if d_z == 1 else depth_aug
    if d_i == 1 and d_z == 1:
        out_mask = BinaryMask(np.zeros_like(mask.values))
    else:
        out_mask = mask
    return out_rgb, out_depth, out_mask


def _quantize_f32(values: np.ndarray) -> np.ndarray:
    # snap to float32-representable values so PFM round trips are exact and
    # every threshold comparison gives the same answer on disk as in memory
    return values.astype(np.float32).astype(np.float64)


def _normal_sample(
    rgb: RgbImage, depth: DepthImage, base_meta: dict, attempts: int
) -> AnomalySample:
    shape = depth.values.shape
    meta = dict(base_meta)
    meta.update(
        degenerate=True,
        attempts=attempts,
        perlin_seed=None,
        freq_x=None,
        freq_y=None,
        alpha=None,
        sigma=None,
        p_z=None,
        beta=None,
        texture=None,
        d_i=0,
        d_z=0,
    )
    return AnomalySample(
        rgb=rgb,
        depth=depth,
        mask=BinaryMask(np.zeros(shape, dtype=np.uint8)),
        delta=FloatMap(np.zeros(shape)),
        meta=meta,
    )


def synthesize_one(
    rgb: RgbImage,
    depth: DepthImage,
    fg: BinaryMask,
    cfg: SynthesisConfig,
    rng: np.random.Generator,
    textures: TextureSource | None = None,
) -> AnomalySample:
    """Generate one dual-modal anomaly sample from a normal pair.

    If the refined mask comes out empty (the noise missed the foreground or
    the magnitude stayed under t_h) the Perlin mask is resampled up to
    cfg.max_retries times; after that a normal sample with an empty mask is
    returned.
    """
    shape = depth.values.shape
    if rgb.values.shape[:2] != shape or fg.values.shape != shape:
        raise DimensionMismatchError("rgb/depth/fg dimensions must match")
    if not fg.values.any():
        raise EmptyForegroundError("foreground mask is empty")
    if textures is None:
        if cfg.textures_root is None:
            raise ValueError("cfg.textures_root is unset and no TextureSource given")
        textures = TextureSource.from_dir(cfg.textures_root)

    h, w = shape
    min_dim = min(h, w)
    k_hi = min(cfg.perlin_k_high, int(np.log2(min_dim)))
    k_lo = min(cfg.perlin_k_low, k_hi)
    sigma_hi = min(cfg.sigma_high, (min_dim - 1) / 6.0)
    sigma_lo = min(cfg.sigma_low, sigma_hi)
    params = cfg.depth

    base_meta = {"t_p": params.t_p, "t_h": params.t_h, "use_skew_filter": cfg.use_skew_filter}

    for attempt in range(1, cfg.max_retries + 1):
        freq_x = 2 ** int(rng.integers(k_lo, k_hi + 1))
        freq_y = 2 ** int(rng.integers(k_lo, k_hi + 1))
        perlin_seed = int(rng.integers(0, 2**63))
        noise = perlin2d(h, w, PerlinConfig(freq_x=freq_x, freq_y=freq_y, seed=perlin_seed))
        placement = ternarize(noise, params.t_p)
        composed = compose_mask(fg, placement)

        alpha = None
        sigma = None
        if cfg.use_skew_filter:
            if cfg.alpha_component_wise:
                alpha = rng.uniform(cfg.alpha_low, cfg.alpha_high, size=2)
            else:
                alpha = np.full(2, rng.uniform(cfg.alpha_low, cfg.alpha_high))
            sigma_scale = float(rng.uniform(sigma_lo, sigma_hi))
            sigma = np.diag([sigma_scale**2, sigma_scale**2])
        p_z = float(rng.uniform(params.p_min, params.p_max))

        if not composed.values.any():
            continue

        if cfg.use_skew_filter:
            kernel = build_kernel(SkewParams(alpha, sigma), max_size=min_dim)
            raw_delta = delta_depth(composed, kernel)
        else:
            raw_delta = FloatMap(composed.values.astype(np.float64))
        scaled = FloatMap(_quantize_f32(p_z * raw_delta.values))

        mask = refine_mask(scaled, 1.0, params.t_h)
        if not mask.values.any():
            continue

        depth_aug = augment_depth(depth, scaled, 1.0)
        texture, texture_path = sample_texture(textures, rng, h, w)
        beta = float(rng.uniform(cfg.beta_low, cfg.beta_high))
        rgb_aug = augment_rgb(rgb, texture, mask, beta)

        d_i = int(rng.random() < cfg.p_d)
        d_z = int(rng.random() < cfg.p_d)
        out_rgb, out_depth, out_mask = apply_dropout(
            rgb, rgb_aug, depth, depth_aug, mask, d_i, d_z
        )

        if out_mask.values.any():
            # a labeled anomaly must actually differ from the normal pair in
            # at least one modality (clamping can erase saturated changes)
            region = out_mask.values == 1
            depth_differs = bool((out_depth.values != depth.values)[region].any())
            rgb_differs = bool((out_rgb.values != rgb.values)[region].any())
            if not (depth_differs or rgb_differs):
                continue

        meta = dict(base_meta)
        meta.update(
            degenerate=False,
            attempts=attempt,
            perlin_seed=perlin_seed,
            freq_x=freq_x,
            freq_y=freq_y,
            alpha=None if alpha is None else [float(a) for a in alpha],
            sigma=None if sigma is None else [[float(v) for v in row] for row in sigma],
            p_z=p_z,
            beta=beta,
            texture=texture_path,
            d_i=d_i,
            d_z=d_z,
        )
        return AnomalySample(
            rgb=out_rgb, depth=out_depth, mask=out_mask, delta=scaled, meta=meta
        )

    return _normal_sample(rgb, depth, base_meta, cfg.max_retries)


def regenerate(
    rgb: RgbImage, depth: DepthImage, fg: BinaryMask, meta: dict
) -> AnomalySample:
    """Replay a sample's meta record through the individual operations.

    The result is bit-identical to the originally synthesized sample; used
    by tests and the validator.
    """
    shape = depth.values.shape
    if meta["degenerate"]:
        return _normal_sample(rgb, depth, meta, meta.get("attempts", 0))
    noise = perlin2d(
        shape[0],
        shape[1],
        PerlinConfig(freq_x=meta["freq_x"], freq_y=meta["freq_y"], seed=meta["perlin_seed"]),
    )
    placement = ternarize(noise, meta["t_p"])
    composed = compose_mask(fg, placement)
    if meta["use_skew_filter"]:
        kernel = build_kernel(
            SkewParams(np.asarray(meta["alpha"]), np.asarray(meta["sigma"])),
            max_size=min(shape),
        )
        raw_delta = delta_depth(composed, kernel)
    else:
        raw_delta = FloatMap(composed.values.astype(np.float64))
    scaled = FloatMap(_quantize_f32(meta["p_z"] * raw_delta.values))
    mask = refine_mask(scaled, 1.0, meta["t_h"])
    depth_aug = augment_depth(depth, scaled, 1.0)
    texture = resize(load_rgb(meta["texture"]), shape[0], shape[1])
    rgb_aug = augment_rgb(rgb, texture, mask, meta["beta"])
    out_rgb, out_depth, out_mask = apply_dropout(
        rgb, rgb_aug, depth, depth_aug, mask, meta["d_i"], meta["d_z"]
    )
    return AnomalySample(
        rgb=out_rgb, depth=out_depth, mask=out_mask, delta=scaled, meta=dict(meta)
    )


# ---------------------------------------------------------------------------
# Dataset-level emission


def _stable_digest(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def sample_rng(master_seed: int, category: str, stem: str, index: int) -> np.random.Generator:
    """Per-sample rng stream; independent of scheduling and worker count."""
    seq = np.random.SeedSequence(
        [master_seed & 0xFFFFFFFFFFFFFFFF, _stable_digest(category), _stable_digest(stem), index]
    )
    return np.random.default_rng(seq)


def discover_pairs(normal_dir) -> list[tuple[str, str]]:
    """Find (category, stem) pairs under the dataset layout.

    A category is any directory containing an ``rgb`` subdirectory; the root
    itself may be a single anonymous category ("").
    """
    normal_dir = Path(normal_dir)
    categories: list[tuple[str, Path]] = []
    if (normal_dir / "rgb").is_dir():
        categories.append(("", normal_dir))
    else:
        for sub in sorted(p for p in normal_dir.iterdir() if p.is_dir()):
            if (sub / "rgb").is_dir():
                categories.append((sub.name, sub))
    pairs = []
    for name, cat_dir in categories:
        for rgb_path in sorted((cat_dir / "rgb").glob("*.png")):
            stem = rgb_path.stem
            depth_path = cat_dir / "depth" / f"{stem}.pfm"
            fg_path = cat_dir / "fg" / f"{stem}.png"
            if not depth_path.is_file():
                raise MissingPairMemberError(f"missing depth member: {depth_path}")
            if not fg_path.is_file():
                raise MissingPairMemberError(f"missing foreground member: {fg_path}")
            pairs.append((name, stem))
    return pairs


def _emit_pair(args) -> list[dict]:
    normal_dir, out_dir, category, stem, cfg, texture_index = args
    normal_dir = Path(normal_dir)
    out_dir = Path(out_dir)
    cat_in = normal_dir / category if category else normal_dir
    cat_out = out_dir / category if category else out_dir
    rgb = load_rgb(cat_in / "rgb" / f"{stem}.png")
    depth = load_depth(cat_in / "depth" / f"{stem}.pfm")
    fg = load_mask(cat_in / "fg" / f"{stem}.png")
    textures = TextureSource(root=Path(cfg.textures_root), index=texture_index)

    entries = []
    for k in range(cfg.samples_per_pair):
        rng = sample_rng(cfg.master_seed, category, stem, k)
        sample = synthesize_one(rgb, depth, fg, cfg, rng, textures=textures)
        sid = f"{stem}_{k:02d}"
        files = {
            "rgb": f"rgb/{sid}.png",
            "depth": f"depth/{sid}.pfm",
            "mask": f"mask/{sid}.png",
            "delta": f"delta/{sid}.pfm",
            "meta": f"meta/{sid}.json",
        }
        save_rgb(sample.rgb, cat_out / files["rgb"])
        save_depth(sample.depth, cat_out / files["depth"])
        save_mask(sample.mask, cat_out / files["mask"])
        write_pfm(cat_out / files["delta"], sample.delta.values)
        meta = dict(sample.meta)
        meta["source"] = {
            "category": category,
            "stem": stem,
            "rgb": f"rgb/{stem}.png",
            "depth": f"depth/{stem}.pfm",
            "fg": f"fg/{stem}.png",
        }
        meta["sample_index"] = k
        meta_path = cat_out / files["meta"]
        meta_path.parent.mkdir(parents=True, exist_ok=True)
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        entries.append(
            {
                "id": f"{category}/{sid}" if category else sid,
                "category": category,
                "stem": stem,
                "sample_index": k,
                "anomalous": sample.anomalous,
                "files": {k2: f"{category}/{v}" if category else v for k2, v in files.items()},
                "meta": meta,
            }
        )
    return entries


def synthesize_dataset(
    normal_dir, cfg: SynthesisConfig, out_dir, workers: int = 1
) -> dict:
    """Synthesize samples for every pair under normal_dir into out_dir.

    Emits rgb PNG, depth PFM, mask PNG, delta PFM and meta JSON per sample
    plus a manifest.json; output bytes are independent of worker count.
    """
    if cfg.textures_root is None:
        raise ValueError("SynthesisConfig.textures_root must be set for dataset synthesis")
    normal_dir = Path(normal_dir)
    out_dir = Path(out_dir)
    pairs = discover_pairs(normal_dir)
    manifest: dict = {"version": 1, "config": cfg.to_dict(), "samples": []}
    if not pairs:
        log.warning("no input pairs found under %s; writing empty manifest", normal_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )
        return manifest

    texture_index = TextureSource.from_dir(cfg.textures_root).index
    tasks = [
        (str(normal_dir), str(out_dir), category, stem, cfg, texture_index)
        for category, stem in pairs
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_emit_pair, tasks))
    else:
        results = [_emit_pair(t) for t in tasks]

    entries = [e for chunk in results for e in chunk]
    entries.sort(key=lambda e: (e["category"], e["stem"], e["sample_index"]))
    manifest["samples"] = entries
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    log.info("synthesized %d samples from %d pairs", len(entries), len(pairs))
    return manifest


# ---------------------------------------------------------------------------
# On-disk validation


def _png_is_strict_binary(path: Path) -> bool:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return bool(np.isin(np.unique(arr), (0, 255)).all())


def validate_dataset(out_dir, normal_dir=None) -> list[str]:
    """Re-check AnomalySample invariants for every emitted sample on disk.

    Returns a list of human-readable violations (empty means the tree is
    sound).  When normal_dir is given, cross-modal consistency against the
    source pairs is verified too.
    """
    out_dir = Path(out_dir)
    problems: list[str] = []
    manifest_path = out_dir / "manifest.json"
    if not manifest_path.is_file():
        return [f"missing manifest: {manifest_path}"]
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        return [f"unreadable manifest: {exc}"]

    for entry in manifest.get("samples", []):
        sid = entry.get("id", "<unknown>")
        files = entry.get("files", {})
        meta = entry.get("meta", {})

        def fail(msg: str) -> None:
            problems.append(f"{sid}: {msg}")

        paths = {key: out_dir / rel for key, rel in files.items()}
        missing = [str(p) for p in paths.values() if not p.is_file()]
        if missing:
            fail(f"missing files: {', '.join(missing)}")
            continue
        try:
            rgb = load_rgb(paths["rgb"])
            depth = load_depth(paths["depth"])
            mask = load_mask(paths["mask"])
            delta = read_pfm(paths["delta"]).astype(np.float64)
            meta_disk = json.loads(paths["meta"].read_text())
        except (ValueError, OSError) as exc:
            fail(f"unreadable sample member: {exc}")
            continue

        if meta_disk != meta:
            fail("meta JSON file disagrees with manifest entry")
        if not _png_is_strict_binary(paths["mask"]):
            fail("mask PNG contains values other than {0, 255}")
        shape = depth.values.shape
        if rgb.values.shape[:2] != shape or mask.values.shape != shape or delta.shape != shape:
            fail("member dimensions disagree")
            continue

        t_h = meta.get("t_h")
        d_i, d_z = meta.get("d_i"), meta.get("d_z")
        if meta.get("degenerate"):
            if mask.values.any():
                fail("degenerate sample has a non-empty mask")
            if np.any(delta != 0.0):
                fail("degenerate sample has a non-zero delta")
        else:
            recomputed = (np.abs(delta) >= t_h).astype(np.uint8)
            if d_i == 1 and d_z == 1:
                if mask.values.any():
                    fail("both-dropped sample must have an empty mask")
            elif not np.array_equal(recomputed, mask.values):
                fail("mask does not equal {|delta| >= t_h}")
            if not mask.values.any() and not (d_i == 1 and d_z == 1):
                fail("non-degenerate sample without dropout has an empty mask")

        if bool(mask.values.any()) != bool(entry.get("anomalous")):
            fail("manifest 'anomalous' flag disagrees with the mask")

        if normal_dir is not None:
            source = meta.get("source", {})
            cat = source.get("category", "")
            base = Path(normal_dir) / cat if cat else Path(normal_dir)
            try:
                rgb_n = load_rgb(base / source["rgb"])
                depth_n = load_depth(base / source["depth"])
            except (KeyError, ValueError, OSError) as exc:
                fail(f"cannot load source pair: {exc}")
                continue
            region = mask.values == 1
            outside = ~region
            if d_i == 1 or meta.get("degenerate"):
                if not np.array_equal(rgb.values, rgb_n.values):
                    fail("RGB was dropped but differs from the normal image")
            elif np.any(rgb.values[outside] != rgb_n.values[outside]):
                fail("RGB differs outside the mask")
            if d_z == 1 or meta.get("degenerate"):
                if not np.array_equal(depth.values, depth_n.values):
                    fail("depth was dropped but differs from the normal image")
            else:
                diff = np.abs(depth.values - depth_n.values)
                if t_h is not None and np.any(diff[outside] > t_h + 1e-6):
                    fail("depth changed by more than t_h outside the mask")
            if region.any():
                depth_differs = bool(np.any(depth.values[region] != depth_n.values[region]))
                rgb_differs = bool(np.any(rgb.values[region] != rgb_n.values[region]))
                if not (depth_differs or rgb_differs):
                    fail("anomalous label but both modalities equal the normal pair")
    return problems
