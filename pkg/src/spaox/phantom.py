"""Layered breast-tissue phantom with randomized cylindrical blood vessels.

A 38x38x38 mm volume is voxelized on a 128^3 grid (pitch ~0.297 mm).
Depth (z) is split into epidermis / dermis / breast layers; one to three
infinite cylinders filled with blood at a random oxygen saturation are
inserted with random position and orientation. Optical properties of the
tissue layers at 700 and 850 nm are fixed; blood absorption follows the
hemoglobin spectrum, while blood scattering inherits the breast layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chromophores import (
    ChromophoreSpectrum,
    OpticalProperties,
    blood_mu_a,
    default_spectrum,
)

__all__ = [
    "PhantomConfig",
    "Cylinder",
    "TissueVolume",
    "build_volume",
    "vessel_mask_slice",
    "gt_so2_slice",
    "EPIDERMIS",
    "DERMIS",
    "BREAST",
    "BLOOD_BASE",
    "WAVELENGTHS",
]

EPIDERMIS, DERMIS, BREAST = 1, 2, 3
BLOOD_BASE = 4  # blood cylinder i gets label BLOOD_BASE + i

WAVELENGTHS = (700.0, 850.0)

# (mu_a cm^-1, mu_s cm^-1, g) per layer at 700 / 850 nm
TISSUE_PROPERTIES = {
    EPIDERMIS: {700.0: OpticalProperties(0.5542, 42.59, 0.9),
                850.0: OpticalProperties(0.2933, 35.17, 0.9)},
    DERMIS: {700.0: OpticalProperties(0.0168, 259.45, 0.9),
             850.0: OpticalProperties(0.0369, 212.31, 0.9)},
    BREAST: {700.0: OpticalProperties(0.0433, 119.76, 0.9),
             850.0: OpticalProperties(0.0575, 99.02, 0.9)},
}


@dataclass(frozen=True)
class PhantomConfig:
    volume_size_mm: tuple[float, float, float] = (38.0, 38.0, 38.0)
    grid_dims: tuple[int, int, int] = (128, 128, 128)
    layer_thicknesses_mm: tuple[float, float, float] = (0.3, 4.7, 33.0)
    n_cylinders_range: tuple[int, int] = (1, 3)
    radius_range_mm: tuple[float, float] = (0.5, 4.0)
    so2_range: tuple[float, float] = (0.0, 1.0)
    vessel_min_row: int = 50  # vessels are placed below this depth row
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.layer_thicknesses_mm) - self.volume_size_mm[2]) > 1e-9:
            raise ValueError("layer thicknesses must sum to volume depth")
        if any(n < 16 for n in self.grid_dims):
            raise ValueError("grid_dims must be >= 16 per axis")
        rlo, rhi = self.radius_range_mm
        if not (0 < rlo <= rhi < min(self.volume_size_mm) / 2):
            raise ValueError("radius range must lie within (0, volume_size/2)")
        clo, chi = self.n_cylinders_range
        if not (0 <= clo <= chi):
            raise ValueError("invalid n_cylinders_range")
        slo, shi = self.so2_range
        if not (0 <= slo <= shi <= 1):
            raise ValueError("so2_range must lie within [0, 1]")

    @property
    def voxel_size_mm(self) -> tuple[float, float, float]:
        return tuple(s / n for s, n in zip(self.volume_size_mm, self.grid_dims))


@dataclass(frozen=True)
class Cylinder:
    """Infinite cylinder: a point on the axis, a unit direction, a radius."""

    point_mm: tuple[float, float, float]
    axis: tuple[float, float, float]
    radius_mm: float
    so2: float

    def __post_init__(self):
        n = math.sqrt(sum(a * a for a in self.axis))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"cylinder axis not unit length: |axis| = {n}")
        if self.radius_mm <= 0:
            raise ValueError("cylinder radius must be positive")
        if not 0 <= self.so2 <= 1:
            raise ValueError("cylinder so2 must be in [0, 1]")


@dataclass(frozen=True)
class TissueVolume:
    """Voxelized label grid plus per-label, per-wavelength optical properties.

    ``labels`` is indexed ``[ix, iy, iz]`` (z = depth). Immutable after
    construction; safe for concurrent reads.
    """

    labels: np.ndarray
    props: dict[int, dict[float, OpticalProperties]]
    voxel_size_mm: tuple[float, float, float]
    cylinders: tuple[Cylinder, ...]
    config: PhantomConfig = field(repr=False, default=None)

    def __post_init__(self):
        self.labels.flags.writeable = False
        present = set(np.unique(self.labels))
        for lab in present:
            for wl in WAVELENGTHS:
                if wl not in self.props.get(int(lab), {}):
                    raise ValueError(f"label {lab} missing properties at {wl} nm")

    @property
    def grid_dims(self) -> tuple[int, int, int]:
        return self.labels.shape

    def so2_of_label(self, label: int) -> float:
        return self.cylinders[label - BLOOD_BASE].so2


def _axis_distance_sq(shape_grids, cyl: Cylinder):
    """Squared distance from each grid point to the cylinder axis line."""
    X, Y, Z = shape_grids
    ax, ay, az = cyl.point_mm
    ux, uy, uz = cyl.axis
    dx, dy, dz = X - ax, Y - ay, Z - az
    t = dx * ux + dy * uy + dz * uz
    return dx * dx + dy * dy + dz * dz - t * t


def _slice_footprint(config: PhantomConfig, cyl: Cylinder) -> np.ndarray:
    """Binary [z, x] footprint of the cylinder on the central y-slice."""
    nx, ny, nz = config.grid_dims
    vx, vy, vz = config.voxel_size_mm
    x = (np.arange(nx) + 0.5) * vx
    z = (np.arange(nz) + 0.5) * vz
    y0 = (ny // 2 + 0.5) * vy
    Z, X = np.meshgrid(z, x, indexing="ij")
    d2 = _axis_distance_sq((X, np.full_like(X, y0), Z), cyl)
    return d2 <= cyl.radius_mm**2


def _draw_cylinder(rng: np.random.Generator, config: PhantomConfig) -> Cylinder:
    """Sample one cylinder; retry until its whole central-slice footprint
    lies below the masked rows (so every sample shows a visible vessel)."""
    sx, sy, sz = config.volume_size_mm
    z_top = config.vessel_min_row * config.voxel_size_mm[2]
    for _ in range(10_000):
        radius = rng.uniform(*config.radius_range_mm)
        so2 = rng.uniform(*config.so2_range)
        point = (rng.uniform(0, sx), rng.uniform(0, sy), rng.uniform(z_top, sz))
        cos_t = rng.uniform(-1.0, 1.0)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
        axis = (sin_t * math.cos(phi), sin_t * math.sin(phi), cos_t)
        cyl = Cylinder(point, axis, radius, so2)
        fp = _slice_footprint(config, cyl)
        if fp.any() and not fp[: config.vessel_min_row].any():
            return cyl
    raise RuntimeError("could not place a cylinder intersecting the slice")


def build_volume(
    config: PhantomConfig, spectrum: ChromophoreSpectrum | None = None
) -> TissueVolume:
    """Deterministically build the labeled tissue volume for ``config.seed``."""
    if spectrum is None:
        spectrum = default_spectrum()
    rng = np.random.default_rng(config.seed)
    nx, ny, nz = config.grid_dims
    vx, vy, vz = config.voxel_size_mm

    # Layer assignment by voxel-center depth.
    zc = (np.arange(nz) + 0.5) * vz
    t_epi, t_derm, _ = config.layer_thicknesses_mm
    layer = np.where(zc < t_epi, EPIDERMIS, np.where(zc < t_epi + t_derm, DERMIS, BREAST))
    labels = np.broadcast_to(layer[None, None, :].astype(np.uint8), (nx, ny, nz)).copy()

    clo, chi = config.n_cylinders_range
    n_cyl = int(rng.integers(clo, chi + 1)) if chi > 0 else 0
    cylinders = tuple(_draw_cylinder(rng, config) for _ in range(n_cyl))

    if cylinders:
        xc = (np.arange(nx) + 0.5) * vx
        yc = (np.arange(ny) + 0.5) * vy
        X, Y, Z = np.meshgrid(xc, yc, zc, indexing="ij")
        for i, cyl in enumerate(cylinders):  # later cylinders override earlier
            inside = _axis_distance_sq((X, Y, Z), cyl) <= cyl.radius_mm**2
            labels[inside] = BLOOD_BASE + i

    props: dict[int, dict[float, OpticalProperties]] = {
        lab: dict(per_wl) for lab, per_wl in TISSUE_PROPERTIES.items()
    }
    for i, cyl in enumerate(cylinders):
        props[BLOOD_BASE + i] = {
            wl: OpticalProperties(
                blood_mu_a(spectrum, cyl.so2, wl),
                TISSUE_PROPERTIES[BREAST][wl].mu_s,
                TISSUE_PROPERTIES[BREAST][wl].g,
            )
            for wl in WAVELENGTHS
        }

    return TissueVolume(labels, props, config.voxel_size_mm, cylinders, config)


def vessel_mask_slice(volume: TissueVolume) -> np.ndarray:
    """Binary [z, x] blood mask on the central y-slice (rows = depth)."""
    ny = volume.labels.shape[1]
    sl = volume.labels[:, ny // 2, :]
    return (sl.T >= BLOOD_BASE).astype(np.uint8)


def gt_so2_slice(volume: TissueVolume) -> np.ndarray:
    """Ground-truth sO2 on the central slice: each blood pixel carries its
    cylinder's saturation, background is 0."""
    ny = volume.labels.shape[1]
    sl = volume.labels[:, ny // 2, :].T
    out = np.zeros(sl.shape, dtype=np.float64)
    for i, cyl in enumerate(volume.cylinders):
        out[sl == BLOOD_BASE + i] = cyl.so2
    return out
