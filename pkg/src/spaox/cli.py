"""Command-line pipeline driver.

Subcommands: generate (phantom + Monte Carlo -> clean dataset), noise
(SNR sweep datasets), unmix (linear-unmixing predictions), eval (metrics
CSV from prediction blobs), export (PGM/raw dumps).

Every run writes a ``run.log`` with the fully resolved configuration
(and nothing non-deterministic, so identical runs produce identical
output trees). Exit codes: 0 success, 2 config error, 3 data error.
"""

from __future__ import annotations

import argparse
import ast
import logging
import sys
import zlib
from pathlib import Path

import numpy as np

from . import chromophores, metrics
from .dataset import Dataset, DatasetError, SampleRecord
from .phantom import PhantomConfig, build_volume, gt_so2_slice, vessel_mask_slice
from .spa_image import (
    DEFAULT_MASK_ROWS,
    SpaImage,
    SpaPair,
    add_noise_pair,
    central_slice,
    mask_top_rows,
    normalize_pair,
    write_pgm,
)
from .transport import BeamSpec, TransportConfig, simulate
from .transport._rng import mix64
from .unmix import UnmixMatrix, lu_map

log = logging.getLogger("spaox")

SNR_SWEEP_DB = (35.0, 30.0, 25.0, 20.0, 15.0, 10.0, 5.0, 0.0)

PRED_SUBDIR = "pred"


class ConfigError(ValueError):
    pass


def sub_seed(seed: int, tag: str, index: int = 0) -> int:
    """Derive an independent 64-bit seed for one pipeline stage."""
    return mix64(mix64(seed ^ zlib.crc32(tag.encode("ascii"))) + index)


def _parse_config_file(path: str) -> dict:
    """Flat ``key = value`` text; values parsed as Python literals."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        try:
            out[key.strip()] = ast.literal_eval(val.strip())
        except (ValueError, SyntaxError) as e:
            raise ConfigError(f"{path}:{lineno}: {e}") from None
    return out


_PHANTOM_KEYS = {
    "volume_size_mm", "grid_dims", "layer_thicknesses_mm", "n_cylinders_range",
    "radius_range_mm", "so2_range", "vessel_min_row",
}
_RUN_KEYS = {"samples", "photons", "seed", "workers", "beam_diameter_mm", "mask_rows"}


def _resolved(args, file_cfg: dict) -> dict:
    cfg = dict(file_cfg)
    unknown = set(cfg) - _PHANTOM_KEYS - _RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("samples", "photons", "seed", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    cfg.setdefault("samples", 10)
    cfg.setdefault("photons", 1_000_000)
    cfg.setdefault("seed", 0)
    cfg.setdefault("workers", 1)
    cfg.setdefault("beam_diameter_mm", 40.0)
    cfg.setdefault("mask_rows", DEFAULT_MASK_ROWS)
    return cfg


def _write_run_log(out_dir: Path, cfg: dict) -> None:
    lines = [f"{k} = {cfg[k]!r}" for k in sorted(cfg)]
    (out_dir / "run.log").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _phantom_config(cfg: dict, seed: int) -> PhantomConfig:
    kwargs = {}
    for key in _PHANTOM_KEYS & set(cfg):
        v = cfg[key]
        kwargs[key] = tuple(v) if isinstance(v, (list, tuple)) else v
    return PhantomConfig(seed=seed, **kwargs)


def cmd_generate(args) -> int:
    cfg = _resolved(args, _parse_config_file(args.config) if args.config else {})
    out = Path(args.out)
    # sample content depends on everything except the sample count and
    # worker count, so those stay out of the reuse digest
    digest = f"{sorted((k, v) for k, v in cfg.items() if k not in ('samples', 'workers'))}"
    dims = _phantom_config(cfg, seed=0).grid_dims
    ds = Dataset.create(out, image_shape=(dims[2], dims[0]), config_digest=digest)
    # Per-sample seeds are pure functions of (seed, index), so an interrupted
    # run can keep finished blobs: the resumed output is byte-identical to a
    # fresh one. Only blobs from the exact same configuration are reused.
    done = {}
    try:
        prev = Dataset.open(out)
        if prev.manifest["config_digest"] == digest:
            done = {
                e["id"]: e
                for e in prev.manifest["samples"]
                if (out / e["path"]).exists()
            }
    except DatasetError:
        pass
    _write_run_log(out, cfg)
    spectrum = chromophores.default_spectrum()
    beam = BeamSpec(diameter_mm=cfg["beam_diameter_mm"])
    seed = cfg["seed"]

    for i in range(cfg["samples"]):
        sample_id = f"sim{i:05d}"
        if sample_id in done:
            ds.manifest["samples"].append(done[sample_id])
            continue
        phantom = _phantom_config(cfg, seed=sub_seed(seed, "phantom", i))
        vol = build_volume(phantom, spectrum)
        gt_seg = vessel_mask_slice(vol)
        gt_so2 = gt_so2_slice(vol)

        images = {}
        for wl in (700.0, 850.0):
            tcfg = TransportConfig(
                n_photons=cfg["photons"],
                seed=sub_seed(seed, f"mc{int(wl)}", i),
                workers=cfg["workers"],
            )
            amap = simulate(vol, wl, beam, tcfg)
            images[wl] = mask_top_rows(central_slice(amap, wl), cfg["mask_rows"])
        pair = normalize_pair(
            SpaPair(images[700.0], images[850.0], "clean", seed=sub_seed(seed, "pair", i))
        )
        record = SampleRecord(
            id=sample_id,
            img700=pair.img700.pixels,
            img850=pair.img850.pixels,
            gt_seg=gt_seg,
            gt_so2=gt_so2 * gt_seg,  # enforce support after f32 rounding
            snr_db="clean",
            provenance="simulated",
            seed=phantom.seed,
        )
        ds.write_sample(record)
        ds.save_manifest()  # commit incrementally; long runs are resumable
        log.info("generated %s (%d/%d)", sample_id, i + 1, cfg["samples"])

    ds.assign_splits(sub_seed(seed, "split"))
    ds.save_manifest()
    return 0


def cmd_noise(args) -> int:
    src = Dataset.open(args.dataset)
    snrs = [float(s) for s in args.snr.split(",")] if args.snr else []
    if not snrs:
        log.warning("empty SNR list: nothing to do")
        return 0
    seed = args.seed if args.seed is not None else 0
    out_root = Path(args.out)
    for snr in snrs:
        name = f"snr{snr:g}".replace(".", "p").replace("-", "m")
        ds = Dataset.create(out_root / name, image_shape=src.image_shape,
                            config_digest=src.manifest["config_digest"])
        _write_run_log(out_root / name, {"source": str(args.dataset), "snr_db": snr, "seed": seed})
        for i, sid in enumerate(src.ids()):
            rec = src.read_sample(sid)
            pair = SpaPair(
                SpaImage(rec.img700, 700.0), SpaImage(rec.img850, 850.0), "clean", rec.seed
            )
            noisy = add_noise_pair(pair, rec.gt_seg, snr,
                                   sub_seed(seed, f"noise{snr:g}", i))
            ds.write_sample(
                SampleRecord(
                    id=rec.id,
                    img700=noisy.img700.pixels,
                    img850=noisy.img850.pixels,
                    gt_seg=rec.gt_seg,
                    gt_so2=rec.gt_so2,
                    snr_db=snr,
                    provenance=rec.provenance,
                    seed=rec.seed,
                ),
                split_name=src.entry(sid).get("split"),
            )
        ds.save_manifest()
        log.info("wrote %s (%d samples)", out_root / name, len(src.ids()))
    return 0


def _write_pred_blob(path: Path, seg_prob: np.ndarray, so2_int: np.ndarray) -> None:
    path.write_bytes(
        np.asarray(seg_prob, dtype="<f4").tobytes()
        + np.asarray(so2_int, dtype="<f4").tobytes()
    )


def read_pred_blob(path: Path, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    blob = path.read_bytes()
    n = shape[0] * shape[1]
    if len(blob) != 2 * 4 * n:
        raise DatasetError(f"{path}: expected {2*4*n} bytes, got {len(blob)}")
    seg = np.frombuffer(blob, dtype="<f4", count=n).reshape(shape)
    so2 = np.frombuffer(blob, dtype="<f4", count=n, offset=4 * n).reshape(shape)
    return seg.astype(np.float64), so2.astype(np.float64)


def cmd_unmix(args) -> int:
    ds = Dataset.open(args.dataset)
    spectrum = (
        chromophores.load_spectrum(Path(args.spectrum).read_text())
        if args.spectrum
        else chromophores.default_spectrum()
    )
    A = UnmixMatrix.from_spectrum(spectrum)
    pred_dir = Path(args.out) / PRED_SUBDIR
    pred_dir.mkdir(parents=True, exist_ok=True)
    _write_run_log(Path(args.out), {"dataset": str(args.dataset), "mask_source": args.mask_source})
    n_invalid = 0
    for sid in ds.ids():
        rec = ds.read_sample(sid)
        if args.mask_source == "gt":
            mask = rec.gt_seg
        else:
            mask = np.load(args.mask_source)[sid]
        pair = SpaPair(SpaImage(rec.img700, 700.0), SpaImage(rec.img850, 850.0),
                       rec.snr_db, rec.seed)
        result = lu_map(pair, A, mask)
        n_invalid += result.n_invalid
        _write_pred_blob(pred_dir / f"{sid}.f32x2", mask.astype(np.float64), result.so2)
    log.info("unmixed %d samples (%d degenerate pixels)", len(ds.ids()), n_invalid)
    return 0


def evaluate_predictions(ds: Dataset, pred_dir: Path, ids: list[str]) -> metrics.EvalReport:
    """Shared evaluation path for every method: binarize seg at 0.5,
    multiply into the final sO2, compare within the ground-truth mask."""
    missing = [sid for sid in ids if not (pred_dir / f"{sid}.f32x2").exists()]
    if missing:
        raise DatasetError(f"missing predictions for ids: {missing[:10]}"
                           + ("..." if len(missing) > 10 else ""))
    report = metrics.EvalReport()
    for sid in ids:
        rec = ds.read_sample(sid)
        seg_prob, so2_int = read_pred_blob(pred_dir / f"{sid}.f32x2", ds.image_shape)
        seg_bin = metrics.binarize(seg_prob)
        so2_final = metrics.final_so2(seg_bin, so2_int)
        stats = metrics.seg_stats(seg_bin, rec.gt_seg)
        report.samples.append(
            metrics.SampleMetrics(
                sample_id=sid,
                dice_loss=metrics.dice_loss(seg_bin, rec.gt_seg),
                fpr=stats.fpr,
                fnr=stats.fnr,
                accuracy=stats.accuracy,
                so2_mse_in_gt_mask=metrics.mse_in_mask(so2_final, rec.gt_so2, rec.gt_seg),
                hybrid_loss=metrics.hybrid_loss(seg_bin, rec.gt_seg, so2_final, rec.gt_so2),
            )
        )
    return report


def cmd_eval(args) -> int:
    ds = Dataset.open(args.dataset)
    ids = ds.ids(args.split) if args.split else ds.ids()
    report = evaluate_predictions(ds, Path(args.predictions) / PRED_SUBDIR, ids)
    if args.out:
        with open(args.out, "w", newline="") as fp:
            report.to_csv(fp)
    else:
        report.to_csv(sys.stdout)
    return 0


def cmd_export(args) -> int:
    ds = Dataset.open(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for sid in ds.ids():
        rec = ds.read_sample(sid)
        for name, arr in zip(("img700", "img850", "gt_seg", "gt_so2"), rec.arrays()):
            with open(out / f"{sid}_{name}.pgm", "wb") as fp:
                write_pgm(np.asarray(arr, dtype=np.float64), fp)
            (out / f"{sid}_{name}.f32").write_bytes(
                np.asarray(arr, dtype="<f4").tobytes()
            )
    log.info("exported %d samples to %s", len(ds.ids()), out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spaox", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate phantoms into a clean dataset")
    g.add_argument("--config", help="flat key=value config file")
    g.add_argument("--samples", type=int)
    g.add_argument("--photons", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    n = sub.add_parser("noise", help="derive noisy datasets at given SNRs")
    n.add_argument("dataset")
    n.add_argument("--snr", default=",".join(f"{s:g}" for s in SNR_SWEEP_DB))
    n.add_argument("--seed", type=int)
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_noise)

    u = sub.add_parser("unmix", help="linear-unmixing sO2 predictions")
    u.add_argument("dataset")
    u.add_argument("--spectrum", help="spectrum CSV (default: bundled)")
    u.add_argument("--mask-source", default="gt")
    u.add_argument("--out", required=True)
    u.set_defaults(func=cmd_unmix)

    e = sub.add_parser("eval", help="evaluate prediction blobs against a dataset")
    e.add_argument("dataset")
    e.add_argument("predictions", help="directory containing pred/<id>.f32x2")
    e.add_argument("--split", choices=("train", "val", "test"))
    e.add_argument("--out", help="CSV output path (default: stdout)")
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("export", help="dump dataset arrays as PGM + raw floats")
    x.add_argument("dataset")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        log.error("config error: %s", e)
        return 2
    except ValueError as e:
        log.error("config error: %s", e)
        return 2
    except DatasetError as e:
        log.error("data error: %s", e)
        return 3
    except OSError as e:
        log.error("data error: %s", e)
        return 3


if __name__ == "__main__":
    sys.exit(main())
