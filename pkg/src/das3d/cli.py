"""Command line interface.

Subcommands: preprocess, synthesize, evaluate, validate, kernel.  Progress
goes to stderr, machine-readable JSON to stdout.  Exit codes: 0 success,
1 validation/metric failure, 2 usage error.  All randomness flows from
--seed (falling back to the DAS3D_SEED environment variable, then 0).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import metrics
from .depth_synth import DepthAugParams
from .imaging import BinaryMask, FloatMap, load_mask, read_pfm, write_pfm
from .pipeline import SynthesisConfig, synthesize_dataset, validate_dataset
from .preprocess import discover_scan_pairs, preprocess_pair
from .skew_filter import SkewParams, build_kernel

log = logging.getLogger("das3d")


def _seed_from(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DAS3D_SEED")
    return int(env) if env else 0


def _cmd_preprocess(args) -> int:
    seed = _seed_from(args)
    input_dir = Path(args.input)
    output_dir = Path(args.output)
    # categories are subdirectories holding xyz/; the root itself may be one
    if (input_dir / "xyz").is_dir():
        categories = [("", input_dir)]
    else:
        categories = [
            (p.name, p) for p in sorted(input_dir.iterdir()) if (p / "xyz").is_dir()
        ]
    n_done = 0
    records = {}
    for name, cat_dir in categories:
        pairs = discover_scan_pairs(cat_dir)
        out_cat = output_dir / name if name else output_dir
        norm_bounds = None
        if args.dataset_norm:
            # first pass: pool min/max of the cut depth over the category
            from .imaging import load_rgb
            from .preprocess import load_point_grid, ransac_plane, remove_background

            lo, hi = np.inf, -np.inf
            for stem, xyz_path, rgb_path in pairs:
                grid = load_point_grid(xyz_path)
                rgb = load_rgb(rgb_path)
                plane = ransac_plane(grid, dist=args.ransac_dist, iters=args.ransac_iters, seed=seed)
                depth_raw, _, _ = remove_background(grid, rgb, plane, dist=args.ransac_dist)
                lo = min(lo, float(depth_raw.values.min()))
                hi = max(hi, float(depth_raw.values.max()))
            norm_bounds = (lo, hi)
        for stem, xyz_path, rgb_path in pairs:
            res = preprocess_pair(
                xyz_path,
                rgb_path,
                out_cat,
                stem,
                out_size=args.size,
                dist=args.ransac_dist,
                iters=args.ransac_iters,
                seed=seed,
                norm_bounds=norm_bounds,
            )
            records[f"{name}/{stem}" if name else stem] = {
                "min": res.record.lo,
                "max": res.record.hi,
            }
            n_done += 1
            log.info("preprocessed %s/%s", name or ".", stem)
    report = {"pairs": n_done, "normalization": records}
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _build_config(args) -> SynthesisConfig:
    cfg = SynthesisConfig.from_file(args.config) if args.config else SynthesisConfig()
    overrides = {}
    if args.seed is not None or os.environ.get("DAS3D_SEED"):
        overrides["master_seed"] = _seed_from(args)
    if args.textures is not None:
        overrides["textures_root"] = str(args.textures)
    if args.samples_per_pair is not None:
        overrides["samples_per_pair"] = args.samples_per_pair
    if args.p_d is not None:
        overrides["p_d"] = args.p_d
    if args.no_skew_filter:
        overrides["use_skew_filter"] = False
    depth_overrides = {}
    for name in ("t_h", "t_p", "p_min", "p_max"):
        value = getattr(args, name)
        if value is not None:
            depth_overrides[name] = value
    if depth_overrides:
        overrides["depth"] = replace(cfg.depth, **depth_overrides)
    return replace(cfg, **overrides) if overrides else cfg


def _cmd_synthesize(args) -> int:
    cfg = _build_config(args)
    if cfg.textures_root is None:
        print("synthesize: --textures (or textures.root in the config) is required", file=sys.stderr)
        return 2
    manifest = synthesize_dataset(args.input, cfg, args.output, workers=args.workers)
    summary = {
        "samples": len(manifest["samples"]),
        "anomalous": sum(1 for s in manifest["samples"] if s["anomalous"]),
        "output": str(args.output),
    }
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _cmd_validate(args) -> int:
    problems = validate_dataset(args.dataset, normal_dir=args.normal_dir)
    json.dump({"problems": problems, "ok": not problems}, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0 if not problems else 1


def _collect_eval_pairs(pred_dir: Path, gt_dir: Path):
    """Yield (category, stem, map, gt mask, image score) over the eval layout.

    Maps are <pred>/<category>/<stem>.pfm, ground truth
    <gt>/<category>/<stem>.png; an optional <pred>/<category>/scores.json
    supplies image-level scores (default: max of the map).
    """
    categories = sorted(p.name for p in pred_dir.iterdir() if p.is_dir())
    if not categories:
        categories = [""]
    for cat in categories:
        pcat = pred_dir / cat if cat else pred_dir
        gcat = gt_dir / cat if cat else gt_dir
        scores_path = pcat / "scores.json"
        scores = json.loads(scores_path.read_text()) if scores_path.is_file() else {}
        for pfm_path in sorted(pcat.glob("*.pfm")):
            stem = pfm_path.stem
            gt_path = gcat / f"{stem}.png"
            if not gt_path.is_file():
                raise FileNotFoundError(f"missing ground truth for {pfm_path}: {gt_path}")
            amap = FloatMap(read_pfm(pfm_path).astype(np.float64))
            gt = load_mask(gt_path)
            score = float(scores.get(stem, amap.values.max()))
            yield cat, stem, amap, gt, score


def _cmd_evaluate(args) -> int:
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = set(wanted) - {"iauroc", "pauroc", "aupro"}
    if unknown:
        print(f"evaluate: unknown metrics {sorted(unknown)}", file=sys.stderr)
        return 2
    pred_dir = Path(args.pred)
    gt_dir = Path(args.gt)
    by_cat: dict[str, dict] = {}
    for cat, stem, amap, gt, score in _collect_eval_pairs(pred_dir, gt_dir):
        slot = by_cat.setdefault(cat, {"maps": [], "gts": [], "scores": [], "labels": []})
        slot["maps"].append(amap)
        slot["gts"].append(gt)
        slot["scores"].append(score)
        slot["labels"].append(int(gt.values.any()))
    if not by_cat:
        print("evaluate: no prediction maps found", file=sys.stderr)
        return 1

    report: dict = {"fpr_limit": args.fpr_limit, "metrics": {}}
    for name in wanted:
        per_cat = {}
        for cat, slot in sorted(by_cat.items()):
            key = cat or "."
            if name == "iauroc":
                per_cat[key] = metrics.auroc(
                    metrics.ScoredImages(np.array(slot["scores"]), np.array(slot["labels"]))
                )
            elif name == "pauroc":
                per_cat[key] = metrics.pixel_auroc(
                    metrics.PixelEval(tuple(slot["maps"]), tuple(slot["gts"]))
                )
            else:
                per_cat[key] = metrics.aupro(
                    metrics.PixelEval(tuple(slot["maps"]), tuple(slot["gts"])),
                    fpr_limit=args.fpr_limit,
                )
        report["metrics"][name] = {
            "per_category": per_cat,
            "mean": float(np.mean(list(per_cat.values()))),
        }
    payload = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(payload + "\n")
    print(payload)
    return 0


def _cmd_kernel(args) -> int:
    params = SkewParams.isotropic(args.alpha_y, args.alpha_x, args.sigma)
    kernel = build_kernel(params)
    write_pfm(args.out, kernel.weights)
    json.dump({"size": kernel.size, "out": str(args.out)}, sys.stdout, indent=2)
    print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="das3d",
        description="Dual-modality 3D anomaly synthesis, preprocessing and evaluation",
    )
    parser.add_argument("--log-level", default="INFO", help="logging level for stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="convert raw XYZ+RGB scans to normalized triples")
    p.add_argument("--input", required=True, help="directory of raw scans (xyz/ + rgb/)")
    p.add_argument("--output", required=True, help="output dataset directory")
    p.add_argument("--ransac-dist", type=float, default=0.005)
    p.add_argument("--ransac-iters", type=int, default=500)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dataset-norm", action="store_true",
                   help="normalize depth with category-level min/max instead of per-image")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("synthesize", help="emit a synthetic anomaly dataset")
    p.add_argument("--input", required=True, help="normalized normal-sample dataset root")
    p.add_argument("--output", required=True, help="output dataset directory")
    p.add_argument("--config", default=None, help="TOML/JSON synthesis config")
    p.add_argument("--textures", default=None, help="texture image directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples-per-pair", type=int, default=None)
    p.add_argument("--p-d", type=float, default=None, help="augmentation dropout probability")
    p.add_argument("--t-h", type=float, default=None)
    p.add_argument("--t-p", type=float, default=None)
    p.add_argument("--p-min", type=float, default=None)
    p.add_argument("--p-max", type=float, default=None)
    p.add_argument("--no-skew-filter", action="store_true",
                   help="add the raw placement mask to depth without smoothing")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("evaluate", help="compute detection/segmentation metrics")
    p.add_argument("--pred", required=True, help="prediction maps directory")
    p.add_argument("--gt", required=True, help="ground-truth masks directory")
    p.add_argument("--metrics", default="iauroc,pauroc,aupro")
    p.add_argument("--fpr-limit", type=float, default=0.3)
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("validate", help="re-check sample invariants of an output tree")
    p.add_argument("dataset", help="synthesized dataset directory")
    p.add_argument("--normal-dir", default=None, help="source normals for cross checks")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("kernel", help="dump a skew kernel as PFM for inspection")
    p.add_argument("--alpha-x", type=float, required=True)
    p.add_argument("--alpha-y", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_kernel)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        stream=sys.stderr,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"das3d {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
