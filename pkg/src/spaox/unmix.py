"""Linear-unmixing oximetry baseline.

Per pixel, solves the 2x2 nonnegative least-squares system

    [PA_700]   [mu_HbO2(700)  mu_Hb(700)] [C_HbO2]
    [PA_850] = [mu_HbO2(850)  mu_Hb(850)] [C_Hb  ]

by exact active-set enumeration (the system is always 2x2, so the
candidates are: unconstrained solution, each axis, and the origin), then
sO2 = C_HbO2 / (C_HbO2 + C_Hb). No fluence compensation: PA values are
used directly as measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chromophores import ChromophoreSpectrum, absorption_at
from .spa_image import SpaPair

__all__ = [
    "UnmixMatrix",
    "ConcentrationPair",
    "LuMapResult",
    "nnls2",
    "so2_from_conc",
    "lu_map",
]


@dataclass(frozen=True)
class UnmixMatrix:
    """Rows = wavelengths (700, 850), columns = (HbO2, Hb), cm^-1."""

    values: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        a = np.asarray(self.values, dtype=np.float64)
        if a.shape != (2, 2):
            raise ValueError("unmixing matrix must be 2x2")
        if not (a > 0).all():
            raise ValueError("unmixing matrix entries must be positive")
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        if abs(det) <= 1e-12 * float(np.abs(a).max()) ** 2:
            raise ValueError("unmixing matrix is singular")

    @classmethod
    def from_spectrum(cls, spectrum: ChromophoreSpectrum) -> "UnmixMatrix":
        return cls(
            (
                (absorption_at(spectrum, 700.0, "HbO2"), absorption_at(spectrum, 700.0, "Hb")),
                (absorption_at(spectrum, 850.0, "HbO2"), absorption_at(spectrum, 850.0, "Hb")),
            )
        )

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


@dataclass(frozen=True)
class ConcentrationPair:
    c_hbo2: float
    c_hb: float

    def __post_init__(self):
        if self.c_hbo2 < 0 or self.c_hb < 0:
            raise ValueError("concentrations must be non-negative")


@dataclass(frozen=True)
class LuMapResult:
    so2: np.ndarray
    n_invalid: int


def _nnls2_batch(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized 2-variable NNLS: b has shape (..., 2); returns (..., 2).

    Ties between the two single-variable candidates break toward the
    solution with larger C_HbO2 (the first column).
    """
    a1 = A[:, 0]
    a2 = A[:, 1]
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]

    # Unconstrained solution of the square system (residual 0).
    x1_free = (A[1, 1] * b[..., 0] - A[0, 1] * b[..., 1]) / det
    x2_free = (A[0, 0] * b[..., 1] - A[1, 0] * b[..., 0]) / det
    free_ok = (x1_free >= 0) & (x2_free >= 0)

    bb = b[..., 0] ** 2 + b[..., 1] ** 2

    # C_Hb = 0: least squares on the first column only, clamped at 0.
    x1 = np.maximum(0.0, (b[..., 0] * a1[0] + b[..., 1] * a1[1]) / (a1 @ a1))
    r1 = bb - 2.0 * x1 * (b[..., 0] * a1[0] + b[..., 1] * a1[1]) + x1 * x1 * (a1 @ a1)

    # C_HbO2 = 0: second column only.
    x2 = np.maximum(0.0, (b[..., 0] * a2[0] + b[..., 1] * a2[1]) / (a2 @ a2))
    r2 = bb - 2.0 * x2 * (b[..., 0] * a2[0] + b[..., 1] * a2[1]) + x2 * x2 * (a2 @ a2)

    use_first = r1 <= r2  # tie -> larger C_HbO2
    out = np.zeros(b.shape, dtype=np.float64)
    out[..., 0] = np.where(use_first, x1, 0.0)
    out[..., 1] = np.where(use_first, 0.0, x2)
    out[..., 0] = np.where(free_ok, x1_free, out[..., 0])
    out[..., 1] = np.where(free_ok, x2_free, out[..., 1])
    return out


def nnls2(A: UnmixMatrix, b) -> ConcentrationPair:
    """argmin ||Ax - b||_2 subject to x >= 0 for the 2x2 system."""
    x = _nnls2_batch(A.array, np.asarray(b, dtype=np.float64).reshape(2))
    return ConcentrationPair(float(x[0]), float(x[1]))


def so2_from_conc(c: ConcentrationPair) -> tuple[float, bool]:
    """sO2 = C_HbO2 / (C_HbO2 + C_Hb); (0, False) when both are zero."""
    total = c.c_hbo2 + c.c_hb
    if total <= 0:
        return 0.0, False
    return c.c_hbo2 / total, True


def lu_map(pair: SpaPair, A: UnmixMatrix, mask: np.ndarray) -> LuMapResult:
    """Per-pixel unmixed sO2 inside ``mask``; 0 outside. Degenerate pixels
    (both concentrations zero) are set to 0 and counted."""
    mask = np.asarray(mask) > 0
    if mask.shape != pair.img700.pixels.shape:
        raise ValueError("mask dimensions do not match images")
    so2 = np.zeros(mask.shape, dtype=np.float64)
    if not mask.any():
        return LuMapResult(so2, 0)
    b = np.stack([pair.img700.pixels[mask], pair.img850.pixels[mask]], axis=-1)
    x = _nnls2_batch(A.array, b)
    total = x[..., 0] + x[..., 1]
    valid = total > 0
    vals = np.zeros(total.shape)
    vals[valid] = x[valid, 0] / total[valid]
    so2[mask] = vals
    return LuMapResult(so2, int((~valid).sum()))
