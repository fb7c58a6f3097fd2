"""Dual-modality (depth + RGB) 3D anomaly synthesis and evaluation toolkit."""

from .depth_synth import (
    DepthAugParams,
    augment_depth,
    compose_mask,
    default_foreground_threshold,
    delta_depth,
    foreground_mask,
    refine_mask,
)
from .imaging import (
    BinaryMask,
    DepthImage,
    FloatMap,
    NormalizationRecord,
    RgbImage,
    TernaryMask,
    denormalize_depth,
    load_depth,
    load_float_map,
    load_mask,
    load_rgb,
    normalize_depth,
    read_pfm,
    resize,
    save_depth,
    save_mask,
    save_rgb,
    write_pfm,
)
from .metrics import PixelEval, ScoredImages, aupro, auroc, connected_components, pixel_auroc
from .noise import PerlinConfig, perlin2d, ternarize
from .pipeline import (
    AnomalySample,
    SynthesisConfig,
    apply_dropout,
    regenerate,
    sample_rng,
    synthesize_dataset,
    synthesize_one,
    validate_dataset,
)
from .preprocess import (
    PlaneModel,
    PointGrid,
    preprocess_pair,
    ransac_plane,
    remove_background,
)
from .rgb_synth import TextureSource, augment_rgb, sample_texture
from .skew_filter import SkewKernel, SkewParams, build_kernel, convolve, skew_pdf

__version__ = "0.1.0"
