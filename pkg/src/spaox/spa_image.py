"""From absorbed-energy volumes to 128x128 sPA image pairs.

Pipeline order is fixed: central slice -> top-row masking -> joint pair
normalization -> noise. Noise variance is computed from the clean
(normalized) image so the reported SNR matches its definition: average
signal power inside the blood vessels divided by the noise variance.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .transport import AbsorbedEnergyMap

__all__ = [
    "SpaImage",
    "SpaPair",
    "central_slice",
    "mask_top_rows",
    "add_noise",
    "normalize_pair",
    "write_pgm",
    "write_raw_f32",
    "read_raw_f32",
    "DEFAULT_MASK_ROWS",
]

DEFAULT_MASK_ROWS = 50


@dataclass(frozen=True)
class SpaImage:
    """One sPA image: rows index depth (z), columns index x."""

    pixels: np.ndarray
    wavelength: float

    def __post_init__(self):
        if self.pixels.ndim != 2:
            raise ValueError("image must be 2D")
        self.pixels.flags.writeable = False


@dataclass(frozen=True)
class SpaPair:
    img700: SpaImage
    img850: SpaImage
    snr_db: float | str = "clean"
    seed: int = 0

    def __post_init__(self):
        if self.img700.pixels.shape != self.img850.pixels.shape:
            raise ValueError("pair images must share dimensions")


def central_slice(energy: AbsorbedEnergyMap, wavelength: float) -> SpaImage:
    """Cross-section at the central y index; image[z, x]."""
    ny = energy.grid.shape[1]
    return SpaImage(energy.grid[:, ny // 2, :].T.copy(), wavelength)


def mask_top_rows(img: SpaImage, n_rows: int = DEFAULT_MASK_ROWS) -> SpaImage:
    """Zero the first n_rows rows (the strong epidermis signal)."""
    px = img.pixels.copy()
    px[:n_rows, :] = 0.0
    return SpaImage(px, img.wavelength)


def normalize_pair(pair: SpaPair) -> SpaPair:
    """Divide both images by their joint maximum.

    Never per-image: the inter-wavelength ratio is what encodes sO2.
    """
    m = max(float(pair.img700.pixels.max()), float(pair.img850.pixels.max()))
    if m <= 0:
        raise ValueError("cannot normalize an all-zero image pair")
    return replace(
        pair,
        img700=SpaImage(pair.img700.pixels / m, pair.img700.wavelength),
        img850=SpaImage(pair.img850.pixels / m, pair.img850.wavelength),
    )


def add_noise(
    img: SpaImage, vessel_mask: np.ndarray, target_snr_db: float, seed: int
) -> SpaImage:
    """Add white Gaussian noise at the target SNR.

    Signal power is the mean squared pixel value inside the vessel mask;
    sigma^2 = P * 10^(-snr_db/10). Noise hits every pixel, including
    masked-out top rows, and negative results are not clipped.
    """
    mask = np.asarray(vessel_mask) > 0
    if mask.shape != img.pixels.shape:
        raise ValueError("vessel mask dimensions do not match image")
    if not mask.any():
        raise ValueError("empty vessel mask: SNR undefined")
    power = float(np.mean(img.pixels[mask] ** 2))
    sigma = np.sqrt(power * 10.0 ** (-target_snr_db / 10.0))
    rng = np.random.default_rng(seed)
    noisy = img.pixels + rng.normal(0.0, sigma, size=img.pixels.shape)
    return SpaImage(noisy, img.wavelength)


def add_noise_pair(
    pair: SpaPair, vessel_mask: np.ndarray, target_snr_db: float, seed: int
) -> SpaPair:
    """Independent noise per wavelength (separate laser shots); the two
    sub-seeds are derived from the pair seed."""
    return SpaPair(
        img700=add_noise(pair.img700, vessel_mask, target_snr_db, seed * 2 + 1),
        img850=add_noise(pair.img850, vessel_mask, target_snr_db, seed * 2 + 2),
        snr_db=target_snr_db,
        seed=seed,
    )


def write_pgm(pixels: np.ndarray, fp: io.BufferedIOBase) -> None:
    """8-bit binary PGM, min-max scaled. Visualization only."""
    lo, hi = float(pixels.min()), float(pixels.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    data = np.round((pixels - lo) * scale).astype(np.uint8)
    h, w = pixels.shape
    fp.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
    fp.write(data.tobytes())


def write_raw_f32(pixels: np.ndarray, fp: io.BufferedIOBase) -> None:
    fp.write(np.asarray(pixels, dtype="<f4").tobytes())


def read_raw_f32(fp: io.BufferedIOBase, shape: tuple[int, int]) -> np.ndarray:
    n = shape[0] * shape[1]
    data = np.frombuffer(fp.read(4 * n), dtype="<f4")
    if data.size != n:
        raise ValueError("truncated raw float image")
    return data.reshape(shape).astype(np.float64)
