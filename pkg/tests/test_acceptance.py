"""End-to-end acceptance checks for the simulation and analysis pipeline.

Each test exercises one headline guarantee at full scale and prints a
single PASS/FAIL line with the measured figure (run with ``pytest -s``
to see them), then asserts it.
"""

import filecmp
import time

import numpy as np
import pytest
from test_metrics import brute_force_counts, brute_force_dice_loss
from test_unmix import grid_search_nnls2

from spaox.chromophores import default_spectrum
from spaox.cli import main
from spaox.metrics import (
    binarize,
    dice_loss,
    hybrid_loss,
    mse_in_mask,
    seg_stats,
)
from spaox.spa_image import SpaImage, SpaPair, add_noise_pair
from spaox.transport import BeamSpec, TransportConfig, sample_hg, simulate
from spaox.transport._rng import PacketStream
from spaox.unmix import UnmixMatrix, nnls2

from conftest import homogeneous_volume


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def test_weight_conservation():
    vol = homogeneous_volume(1.0, 1.0, 0.5, dims=(16, 16, 16), size_mm=(16.0,) * 3)
    beam = BeamSpec(diameter_mm=8.0)
    t0 = time.monotonic()

    cfg = TransportConfig(n_photons=100_000, roulette_threshold=0.0, seed=11)
    res = simulate(vol, 700.0, beam=beam, config=cfg)
    err_off = abs(res.deposited_weight + res.escaped_weight - 1.0)

    cfg = TransportConfig(n_photons=1_000_000, seed=11)
    res = simulate(vol, 700.0, beam=beam, config=cfg)
    err_on = abs(res.deposited_weight + res.escaped_weight - 1.0)

    elapsed = time.monotonic() - t0
    ok = err_off <= 1e-6 and err_on <= 0.01 and elapsed < 30.0
    _report(
        "weight conservation",
        ok,
        f"roulette off |err|={err_off:.3g} <= 1e-6, "
        f"roulette on |err|={err_on:.3g} <= 0.01, {elapsed:.1f}s < 30s",
    )


def test_absorption_only_depth_profile_matches_beer_lambert():
    # mu_s = 0: packets travel straight down and deposit their full weight
    # at an Exp(mu_a)-distributed depth, so the per-layer deposition must
    # integrate exp(-mu_a z) over each 1 mm layer.
    vol = homogeneous_volume(1.0, 0.0, 0.0, dims=(8, 8, 80), size_mm=(8.0, 8.0, 80.0))
    cfg = TransportConfig(n_photons=1_000_000, seed=7)
    res = simulate(vol, 700.0, beam=BeamSpec(diameter_mm=4.0), config=cfg)

    per_layer = res.grid.sum(axis=(0, 1))[:20]  # z <= 2 cm
    edges_cm = np.arange(21) * 0.1
    expected = np.exp(-edges_cm[:-1]) - np.exp(-edges_cm[1:])  # mu_a = 1 /cm
    rel = np.abs(per_layer / expected - 1.0)
    ok = float(rel.max()) <= 0.02
    _report(
        "absorption-only depth profile",
        ok,
        f"max relative deviation {rel.max():.4f} <= 0.02 over z <= 2 cm",
    )


def test_scattering_cosine_statistics():
    worst = 0.0
    stream = PacketStream(seed=42, index=0)
    for g in (0.0, 0.5, 0.9):
        u = np.array([stream.uniform() for _ in range(1_000_000)])
        worst = max(worst, abs(float(np.mean(sample_hg(g, u))) - g))
    closed = float(sample_hg(0.9, 0.5))
    ok = worst <= 0.003 and closed == 0.9855
    _report(
        "scattering cosine statistics",
        ok,
        f"max |mean cos - g| = {worst:.5f} <= 0.003 over 1e6 draws; "
        f"closed form at g=0.9, u=0.5 -> {closed!r} == 0.9855",
    )


def test_unmixing_exact_recovery_and_constrained_oracle():
    A = UnmixMatrix.from_spectrum(default_spectrum())
    Aa = A.array
    rng = np.random.default_rng(2024)

    worst_s = 0.0
    for _ in range(1000):
        s = rng.uniform(0.0, 1.0)
        scale = rng.uniform(0.1, 10.0)
        b = Aa @ np.array([scale * s, scale * (1.0 - s)])
        c = nnls2(A, b)
        worst_s = max(worst_s, abs(c.c_hbo2 / (c.c_hbo2 + c.c_hb) - s))

    worst_c = 0.0
    for _ in range(1000):
        b = rng.uniform(-2.0, 8.0, size=2)
        c = nnls2(A, b)
        ref = grid_search_nnls2(Aa, b)
        worst_c = max(worst_c, abs(c.c_hbo2 - ref[0]), abs(c.c_hb - ref[1]))

    ok = worst_s <= 1e-9 and worst_c <= 2e-3
    _report(
        "unmixing recovery",
        ok,
        f"noiseless sO2 error {worst_s:.2e} <= 1e-9 on 1000 pairs; "
        f"grid-oracle gap {worst_c:.2e} <= 2e-3 on 1000 instances",
    )


def test_segmentation_metrics_match_per_pixel_counting():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        pred = binarize(rng.random((16, 16)))
        gt = (rng.random((16, 16)) > 0.5).astype(np.uint8)
        st = seg_stats(pred, gt)
        tp, tn, fp, fn = brute_force_counts(pred, gt)
        assert (st.tp, st.tn, st.fp, st.fn) == (tp, tn, fp, fn)
        pos, neg = tp + fn, tn + fp
        worst = max(
            worst,
            abs(st.fpr - (fp / neg if neg else 0.0)),
            abs(st.fnr - (fn / pos if pos else 0.0)),
            abs(st.accuracy - (tp + tn) / 256),
            abs(dice_loss(pred, gt) - brute_force_dice_loss(pred, gt)),
        )
        so2_pred = rng.random((16, 16))
        so2_gt = rng.random((16, 16))
        if gt.any():
            m = gt > 0
            worst = max(
                worst,
                abs(
                    mse_in_mask(so2_pred, so2_gt, gt)
                    - np.mean((so2_pred[m] - so2_gt[m]) ** 2)
                ),
            )
    ok = worst <= 1e-12
    _report(
        "metrics vs per-pixel counting",
        ok,
        f"counts exact, worst ratio deviation {worst:.2e} <= 1e-12 on 1000 pairs",
    )


def test_hybrid_loss_ignores_background_so2():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(50):
        gt_seg = (rng.random((32, 32)) > 0.8).astype(np.uint8)
        if not gt_seg.any():
            continue
        seg_pred = rng.random((32, 32))
        so2_pred = rng.random((32, 32))
        so2_gt = rng.random((32, 32)) * gt_seg
        base = hybrid_loss(seg_pred, gt_seg, so2_pred, so2_gt)
        perturbed = so2_pred + rng.normal(0, 10.0, (32, 32)) * (gt_seg == 0)
        worst = max(worst, abs(hybrid_loss(seg_pred, gt_seg, perturbed, so2_gt) - base))
    ok = worst == 0.0
    _report(
        "hybrid loss masking",
        ok,
        f"background sO2 perturbations change the loss by exactly {worst!r}",
    )


def test_noise_calibration_across_snr_sweep():
    rng = np.random.default_rng(31)
    pixels = np.zeros((128, 128))
    pixels[50:] = rng.random((78, 128))
    mask = np.zeros((128, 128), dtype=np.uint8)
    mask[60:90, 40:80] = 1
    pair = SpaPair(SpaImage(pixels, 700.0), SpaImage(pixels.copy(), 850.0))
    power = float(np.mean(pixels[mask > 0] ** 2))

    worst = 0.0
    for snr in (35, 30, 25, 20, 15, 10, 5, 0):
        measured = []
        for draw in range(100):
            noisy = add_noise_pair(pair, mask, float(snr), seed=1000 * snr + draw)
            for clean, out in ((pair.img700, noisy.img700), (pair.img850, noisy.img850)):
                noise_power = float(np.mean((out.pixels - clean.pixels) ** 2))
                measured.append(10.0 * np.log10(power / noise_power))
        worst = max(worst, abs(float(np.mean(measured)) - snr))
    ok = worst <= 0.2
    _report(
        "noise calibration",
        ok,
        f"max |measured - target| = {worst:.3f} dB <= 0.2 dB, "
        "100 draws per SNR in 35..0",
    )


def test_dataset_generation_is_byte_identical(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(
        "grid_dims = (16, 16, 16)\n"
        "vessel_min_row = 6\n"
        "mask_rows = 6\n"
        "photons = 2000\n"
        "samples = 2\n"
        "seed = 3\n"
    )
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert main(["generate", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["generate", "--config", str(cfg), "--out", str(out2)]) == 0
    names = ["manifest.json", "run.log"] + [
        f"samples/{p.name}" for p in sorted((out1 / "samples").iterdir())
    ]
    match, mismatch, errors = filecmp.cmpfiles(out1, out2, names, shallow=False)
    ok = not mismatch and not errors and len(match) == len(names)
    _report(
        "dataset generation determinism",
        ok,
        f"{len(match)}/{len(names)} files byte-identical across two runs",
    )
