"""Hemoglobin absorption spectra and blood absorption vs. oxygen saturation.

The bundled spectrum file gives the absorption coefficient of fully
oxygenated (HbO2) and fully deoxygenated (Hb) whole blood at a total
hemoglobin concentration of 150 g/L, derived from standard tabulated
molar extinction coefficients via

    mu_a = ln(10) * epsilon(lambda) * C_molar,   C_molar = 150 / 64500 mol/L

Swap the CSV to change concentration or source tables; no code changes
are needed because only ratios matter for sO2 estimation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from importlib import resources

__all__ = [
    "ChromophoreSpectrum",
    "OpticalProperties",
    "SpectrumParseError",
    "absorption_at",
    "blood_mu_a",
    "load_spectrum",
    "default_spectrum",
]

SPECTRUM_HEADER = "wavelength_nm,mu_a_hbo2_cm1,mu_a_hb_cm1"


class SpectrumParseError(ValueError):
    """Raised when a spectrum CSV is malformed or violates invariants."""


@dataclass(frozen=True)
class OpticalProperties:
    """Absorption/scattering coefficients (cm^-1) and anisotropy g."""

    mu_a: float
    mu_s: float
    g: float

    def __post_init__(self):
        if self.mu_a < 0 or self.mu_s < 0:
            raise ValueError(f"negative optical coefficient: {self}")
        if abs(self.g) > 1:
            raise ValueError(f"anisotropy out of [-1, 1]: {self.g}")

    @property
    def mu_t(self) -> float:
        return self.mu_a + self.mu_s


@dataclass(frozen=True)
class ChromophoreSpectrum:
    """Tabulated (wavelength_nm, mu_a_HbO2, mu_a_Hb) rows, cm^-1."""

    entries: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if not self.entries:
            raise SpectrumParseError("spectrum has no entries")
        prev = None
        for wl, a, b in self.entries:
            if prev is not None and wl <= prev:
                raise SpectrumParseError(
                    f"wavelengths not strictly increasing at {wl} nm"
                )
            if a <= 0 or b <= 0:
                raise SpectrumParseError(f"nonpositive mu_a at {wl} nm")
            prev = wl

    @property
    def wavelength_range(self) -> tuple[float, float]:
        return self.entries[0][0], self.entries[-1][0]


def absorption_at(
    spectrum: ChromophoreSpectrum, wavelength: float, chromophore: str
) -> float:
    """Table lookup with linear interpolation between bracketing rows.

    ``chromophore`` is ``"HbO2"`` or ``"Hb"``. Wavelengths outside the
    table range raise ValueError.
    """
    col = {"HbO2": 1, "Hb": 2}.get(chromophore)
    if col is None:
        raise ValueError(f"unknown chromophore: {chromophore!r}")
    lo, hi = spectrum.wavelength_range
    if wavelength < lo or wavelength > hi:
        raise ValueError(
            f"wavelength {wavelength} nm outside table range [{lo}, {hi}]"
        )
    entries = spectrum.entries
    for i, row in enumerate(entries):
        if row[0] == wavelength:
            return row[col]
        if row[0] > wavelength:
            prev = entries[i - 1]
            t = (wavelength - prev[0]) / (row[0] - prev[0])
            return prev[col] + t * (row[col] - prev[col])
    raise AssertionError("unreachable: range checked above")


def blood_mu_a(
    spectrum: ChromophoreSpectrum, so2: float, wavelength: float
) -> float:
    """Absorption of blood at oxygen saturation ``so2``: the saturation-
    weighted sum of the HbO2 and Hb table values."""
    if not 0.0 <= so2 <= 1.0:
        raise ValueError(f"so2 must be in [0, 1], got {so2}")
    a = absorption_at(spectrum, wavelength, "HbO2")
    b = absorption_at(spectrum, wavelength, "Hb")
    return so2 * a + (1.0 - so2) * b


def load_spectrum(source: str) -> ChromophoreSpectrum:
    """Parse a spectrum CSV (header ``wavelength_nm,mu_a_hbo2_cm1,mu_a_hb_cm1``)."""
    lines = [ln.strip() for ln in io.StringIO(source)]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise SpectrumParseError("empty spectrum file")
    start = 0
    if lines[0].replace(" ", "") == SPECTRUM_HEADER:
        start = 1
    entries = []
    for lineno, ln in enumerate(lines[start:], start=start + 1):
        parts = ln.split(",")
        if len(parts) != 3:
            raise SpectrumParseError(f"line {lineno}: expected 3 fields, got {ln!r}")
        try:
            wl, a, b = (float(p) for p in parts)
        except ValueError as e:
            raise SpectrumParseError(f"line {lineno}: {e}") from None
        entries.append((wl, a, b))
    try:
        return ChromophoreSpectrum(tuple(entries))
    except SpectrumParseError as e:
        raise SpectrumParseError(f"invalid spectrum: {e}") from None


def default_spectrum() -> ChromophoreSpectrum:
    """The bundled 150 g/L whole-blood hemoglobin spectrum."""
    text = (
        resources.files("spaox.data")
        .joinpath("hemoglobin_mua_150gL.csv")
        .read_text(encoding="utf-8")
    )
    return load_spectrum(text)
