#!/usr/bin/env python3
"""End-to-end toy experiment.

Generates procedural normals, synthesizes anomaly data with the das3d CLI,
trains the reconstruct-and-discriminate model, scores a held-out set
(normals + anomalous), and evaluates with `das3d evaluate`.  Prints the
metrics report JSON to stdout and writes everything under --workdir.
"""

from __future__ import annotations

import argparse
import json
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

TRAINER_ROOT = Path(__file__).resolve().parent.parent
REPO_ROOT = TRAINER_ROOT.parent
sys.path.insert(0, str(TRAINER_ROOT / "src"))

from das3d_trainer.config import TrainConfig
from das3d_trainer.fileio import load_manifest, write_mask, read_mask
from das3d_trainer.infer import load_checkpoint, predict_tree
from das3d_trainer.train import train


def das3d_cmd() -> list[str]:
    exe = shutil.which("das3d")
    if exe:
        return [exe]
    return [sys.executable, "-m", "das3d.cli"]


def run(cmd: list[str]) -> None:
    subprocess.run(cmd, check=True, stdout=subprocess.DEVNULL)


def make_normals(out_dir: Path, count: int, size: int, seed: int, textures: Path | None) -> None:
    cmd = [
        sys.executable,
        str(REPO_ROOT / "scripts" / "make_toy_dataset.py"),
        "--out", str(out_dir),
        "--count", str(count),
        "--size", str(size),
        "--seed", str(seed),
    ]
    if textures is not None:
        cmd += ["--textures-out", str(textures), "--texture-count", "12"]
    run(cmd)


# defect scales sized for 64x64 toy images (the toolkit defaults target 256x256)
TOY_SYNTH_CONFIG = {
    "sigma_low": 1.0,
    "sigma_high": 4.0,
    "perlin_k_low": 1,
    "perlin_k_high": 3,
    "depth": {"t_p": 0.5, "t_h": 0.005, "p_min": 0.02, "p_max": 0.1},
}


def synthesize(normals: Path, out: Path, textures: Path, seed: int, spp: int,
               p_d: float, skew: bool, workers: int = 1) -> None:
    cfg_path = out.parent / f"{out.name}_config.json"
    cfg_path.parent.mkdir(parents=True, exist_ok=True)
    cfg_path.write_text(json.dumps(TOY_SYNTH_CONFIG))
    cmd = das3d_cmd() + [
        "synthesize",
        "--input", str(normals),
        "--output", str(out),
        "--config", str(cfg_path),
        "--textures", str(textures),
        "--seed", str(seed),
        "--samples-per-pair", str(spp),
        "--p-d", str(p_d),
        "--workers", str(workers),
    ]
    if not skew:
        cmd.append("--no-skew-filter")
    run(cmd)


def build_eval_set(normals_test: Path, synth_test: Path, gt_dir: Path,
                   category: str = "toy") -> list[tuple[str, Path, Path]]:
    """Collect (stem, rgb, depth) inference items and write GT masks.

    Held-out normals get all-zero masks; synthesized anomalies reuse their
    emitted masks.  Stems are prefixed to keep the two groups disjoint.
    """
    items: list[tuple[str, Path, Path]] = []
    gt_cat = gt_dir / category
    gt_cat.mkdir(parents=True, exist_ok=True)

    normals_cat = normals_test / category
    for rgb_path in sorted((normals_cat / "rgb").glob("*.png")):
        stem = f"normal_{rgb_path.stem}"
        depth_path = normals_cat / "depth" / f"{rgb_path.stem}.pfm"
        items.append((stem, rgb_path, depth_path))
        size = read_mask(normals_cat / "fg" / f"{rgb_path.stem}.png").shape
        write_mask(gt_cat / f"{stem}.png", np.zeros(size))

    manifest = load_manifest(synth_test)
    for entry in manifest["samples"]:
        sid = entry["id"].split("/")[-1]
        stem = f"anom_{sid}"
        files = entry["files"]
        items.append((stem, synth_test / files["rgb"], synth_test / files["depth"]))
        shutil.copy(synth_test / files["mask"], gt_cat / f"{stem}.png")
    return items


def evaluate(pred: Path, gt: Path, out_json: Path) -> dict:
    cmd = das3d_cmd() + [
        "evaluate",
        "--pred", str(pred),
        "--gt", str(gt),
        "--metrics", "iauroc,pauroc,aupro",
        "--fpr-limit", "0.3",
        "--out", str(out_json),
    ]
    subprocess.run(cmd, check=True, stdout=subprocess.DEVNULL)
    return json.loads(out_json.read_text())


def run_toy(
    workdir: Path,
    seed: int = 0,
    data_seed: int | None = None,
    train_count: int = 200,
    test_count: int = 100,
    size: int = 64,
    epochs: int = 15,
    spp: int = 2,
    p_d: float = 0.25,
    skew: bool = True,
    base_width: int = 6,
) -> dict:
    """Full pipeline; returns the evaluation report dict.

    `seed` drives training-set synthesis and model initialization;
    `data_seed` (default: seed) drives the procedural normals and the
    held-out test set, so ablation runs can share one evaluation set.
    Stages already present under workdir are reused, which is safe because
    every stage is deterministic in its seeds.
    """
    workdir = Path(workdir)
    if data_seed is None:
        data_seed = seed
    textures = workdir / "textures"
    normals_train = workdir / f"normals_train_d{data_seed}"
    normals_test = workdir / f"normals_test_d{data_seed}"
    if not (normals_train / "toy" / "rgb").is_dir():
        make_normals(normals_train, train_count, size, data_seed * 1000 + 1, textures)
        make_normals(normals_test, test_count, size, data_seed * 1000 + 2, None)

    tag = f"{'skew' if skew else 'plain'}_pd{p_d:g}_s{seed}_d{data_seed}"
    synth_train = workdir / f"synth_train_{tag}"
    if not (synth_train / "manifest.json").is_file():
        synthesize(normals_train, synth_train, textures, seed * 1000 + 3, spp, p_d, skew)
    # held-out anomalies always come from the full (skew) generator, no dropout
    synth_test = workdir / f"synth_test_d{data_seed}"
    if not (synth_test / "manifest.json").is_file():
        synthesize(normals_test, synth_test, textures, data_seed * 1000 + 4, 1, 0.0, True)

    cfg = TrainConfig(
        manifest=str(synth_train),
        normals=str(normals_train),
        image_size=size,
        epochs=epochs,
        seed=seed,
        base_width=base_width,
    )
    ckpt = workdir / f"model_{tag}.pt"
    start = time.perf_counter()
    history = train(cfg, ckpt)
    train_minutes = (time.perf_counter() - start) / 60.0

    model, _ = load_checkpoint(ckpt)
    pred_dir = workdir / f"pred_{tag}"
    gt_dir = workdir / f"gt_d{data_seed}"
    items = build_eval_set(normals_test, synth_test, gt_dir)
    predict_tree(model, items, pred_dir, "toy")

    report = evaluate(pred_dir, gt_dir, workdir / f"report_{tag}.json")
    report["train_minutes"] = train_minutes
    report["loss_history"] = history
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--data-seed", type=int, default=None)
    parser.add_argument("--train-count", type=int, default=200)
    parser.add_argument("--test-count", type=int, default=100)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=15)
    parser.add_argument("--samples-per-pair", type=int, default=2)
    parser.add_argument("--p-d", type=float, default=0.25)
    parser.add_argument("--no-skew-filter", action="store_true")
    parser.add_argument("--base-width", type=int, default=6)
    args = parser.parse_args(argv)
    report = run_toy(
        Path(args.workdir),
        seed=args.seed,
        data_seed=args.data_seed,
        train_count=args.train_count,
        test_count=args.test_count,
        size=args.size,
        epochs=args.epochs,
        spp=args.samples_per_pair,
        p_d=args.p_d,
        skew=not args.no_skew_filter,
        base_width=args.base_width,
    )
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
