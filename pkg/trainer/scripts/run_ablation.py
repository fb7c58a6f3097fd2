#!/usr/bin/env python3
"""Ablation: skew filter + augmentation dropout vs plain masks + no dropout.

Both configurations train on the same procedural normals and are scored on
one shared held-out set (synthesized with the full generator), across
several seeds.  Prints per-seed and mean image AUROC for both arms.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from run_toy import run_toy


def run_ablation(
    workdir: Path,
    seeds: tuple[int, ...] = (0, 1, 2),
    data_seed: int = 100,
    train_count: int = 100,
    test_count: int = 40,
    epochs: int = 8,
    p_d: float = 0.25,
) -> dict:
    results: dict = {"with_skew_dropout": {}, "plain_no_dropout": {}}
    common = dict(
        data_seed=data_seed,
        train_count=train_count,
        test_count=test_count,
        epochs=epochs,
        spp=1,
    )
    for seed in seeds:
        for arm, kwargs in (
            ("with_skew_dropout", dict(p_d=p_d, skew=True)),
            ("plain_no_dropout", dict(p_d=0.0, skew=False)),
        ):
            report = run_toy(workdir, seed=seed, **common, **kwargs)
            results[arm][str(seed)] = report["metrics"]["iauroc"]["mean"]
    for arm in results:
        values = list(results[arm].values())
        results[arm]["mean"] = sum(values) / len(values)
    return results


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", required=True)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--data-seed", type=int, default=100)
    parser.add_argument("--train-count", type=int, default=100)
    parser.add_argument("--test-count", type=int, default=40)
    parser.add_argument("--epochs", type=int, default=8)
    args = parser.parse_args(argv)
    results = run_ablation(
        Path(args.workdir),
        seeds=tuple(args.seeds),
        data_seed=args.data_seed,
        train_count=args.train_count,
        test_count=args.test_count,
        epochs=args.epochs,
    )
    json.dump(results, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
