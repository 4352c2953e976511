"""Monte Carlo light transport: beam/config types, the simulate() driver,
and the raw absorbed-energy dump format.

The per-packet physics lives in a compiled Cython kernel when available
(``spaox.transport._kernel``) with a pure-Python fallback
(``spaox.transport.reference``); both produce bit-identical results.
Packets are processed in fixed-size chunks, each accumulating into its
own buffer; buffers are merged in chunk order, so the result does not
depend on the worker count.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..phantom import TissueVolume
from . import reference

try:  # compiled extension is optional; fall back to pure Python
    from . import _kernel as _compiled
except ImportError:  # pragma: no cover - depends on build environment
    _compiled = None

DEFAULT_BACKEND = _compiled if _compiled is not None else reference
BACKEND_NAME = DEFAULT_BACKEND.BACKEND_NAME

CHUNK_PACKETS = 1 << 16

__all__ = [
    "BeamSpec",
    "TransportConfig",
    "AbsorbedEnergyMap",
    "simulate",
    "sample_hg",
    "spin",
    "write_mcvol",
    "read_mcvol",
    "BACKEND_NAME",
]


@dataclass(frozen=True)
class BeamSpec:
    """Circular flat beam at normal incidence on the top (z=0) face.

    ``center_mm`` defaults to the center of the top face. Launch points
    falling outside the face (the 40 mm default beam overhangs a 38 mm
    volume) are counted as clipped and their weight escapes immediately.
    """

    diameter_mm: float = 40.0
    center_mm: tuple[float, float] | None = None

    def __post_init__(self):
        if self.diameter_mm <= 0:
            raise ValueError("beam diameter must be positive")


@dataclass(frozen=True)
class TransportConfig:
    n_photons: int = 1_000_000
    roulette_threshold: float = 1e-4  # 0 disables roulette
    roulette_m: int = 10
    seed: int = 0
    boundary: str = "matched"
    workers: int = 1

    def __post_init__(self):
        if self.n_photons < 1:
            raise ValueError("n_photons must be >= 1")
        if not 0 <= self.roulette_threshold < 1:
            raise ValueError("roulette_threshold must be in [0, 1)")
        if self.roulette_m < 2:
            raise ValueError("roulette_m must be >= 2")
        if self.boundary != "matched":
            raise ValueError("only matched (index-matched) boundaries supported")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class AbsorbedEnergyMap:
    """Deposited photon weight per launched packet, per voxel."""

    grid: np.ndarray  # float64 [nx, ny, nz]
    escaped_weight: float
    deposited_weight: float
    voxel_size_mm: tuple[float, float, float]
    n_photons: int
    clipped_launches: int = 0


def sample_hg(g: float, u):
    """Henyey-Greenstein scattering cosine(s) for uniform draw(s) ``u``.

    Vectorized over ``u``; ``g`` is the anisotropy (mean cosine).
    """
    if abs(g) > 1:
        raise ValueError("anisotropy g must satisfy |g| <= 1")
    u = np.asarray(u, dtype=np.float64)
    if g == 0.0:
        out = 2.0 * u - 1.0
    else:
        tmp = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
        out = np.clip((1.0 + g * g - tmp * tmp) / (2.0 * g), -1.0, 1.0)
    return float(out) if out.ndim == 0 else out


def spin(direction, cos_theta: float, phi: float):
    """Rotate a unit direction vector by (cos_theta, phi); returns a unit
    3-vector whose angle to the input has cosine ``cos_theta``."""
    ux, uy, uz = direction
    n = math.sqrt(ux * ux + uy * uy + uz * uz)
    if abs(n - 1.0) > 1e-9:
        raise ValueError("direction must be unit length")
    return reference.spin_scalar(ux, uy, uz, cos_theta, phi)


def _label_tables(volume: TissueVolume, wavelength: float):
    max_label = int(volume.labels.max())
    mua = np.zeros(max_label + 1)
    mus = np.zeros(max_label + 1)
    g = np.zeros(max_label + 1)
    for lab, per_wl in volume.props.items():
        if lab > max_label:
            continue
        if wavelength not in per_wl:
            raise ValueError(f"no optical properties at {wavelength} nm for label {lab}")
        p = per_wl[wavelength]
        mua[lab], mus[lab], g[lab] = p.mu_a, p.mu_s, p.g
    present = np.unique(volume.labels)
    for lab in present:
        if int(lab) not in volume.props:
            raise ValueError(f"label {lab} present in grid but has no properties")
    return mua, mus, g


def simulate(
    volume: TissueVolume,
    wavelength: float,
    beam: BeamSpec | None = None,
    config: TransportConfig | None = None,
    backend=None,
) -> AbsorbedEnergyMap:
    """Run the hop/drop/spin transport and return the absorbed-energy map.

    Deterministic for fixed (seed, n_photons) regardless of ``workers``.
    """
    beam = beam or BeamSpec()
    config = config or TransportConfig()
    engine = backend if backend is not None else DEFAULT_BACKEND

    mua, mus, g = _label_tables(volume, wavelength)
    labels = np.ascontiguousarray(volume.labels, dtype=np.uint8)
    voxel_cm = tuple(v / 10.0 for v in volume.voxel_size_mm)
    nx, ny, nz = labels.shape
    if beam.center_mm is None:
        cx_cm = nx * voxel_cm[0] / 2.0
        cy_cm = ny * voxel_cm[1] / 2.0
    else:
        cx_cm, cy_cm = beam.center_mm[0] / 10.0, beam.center_mm[1] / 10.0
    r_cm = beam.diameter_mm / 20.0

    starts = list(range(0, config.n_photons, CHUNK_PACKETS))

    def run(start: int):
        count = min(CHUNK_PACKETS, config.n_photons - start)
        buf = np.zeros(labels.shape, dtype=np.float64)
        esc, clip = engine.run_chunk(
            labels, mua, mus, g, voxel_cm, cx_cm, cy_cm, r_cm,
            config.seed, start, count,
            config.roulette_threshold, config.roulette_m, buf,
        )
        return buf, esc, clip

    total = np.zeros(labels.shape, dtype=np.float64)
    escaped = 0.0
    clipped = 0
    if config.workers == 1 or len(starts) == 1:
        results = map(run, starts)
    else:
        pool = ThreadPoolExecutor(max_workers=config.workers)
        results = pool.map(run, starts)
    for buf, esc, clip in results:  # fixed chunk order => deterministic merge
        total += buf
        escaped += esc
        clipped += clip
    if config.workers > 1 and len(starts) > 1:
        pool.shutdown()

    total /= config.n_photons
    escaped /= config.n_photons
    return AbsorbedEnergyMap(
        grid=total,
        escaped_weight=escaped,
        deposited_weight=float(total.sum()),
        voxel_size_mm=volume.voxel_size_mm,
        n_photons=config.n_photons,
        clipped_launches=clipped,
    )


def write_mcvol(map_: AbsorbedEnergyMap, fp: io.BufferedIOBase) -> None:
    """Raw dump: one-line text header ``MCVOL nx ny nz voxel_mm`` then
    little-endian float32, row-major with x fastest."""
    nx, ny, nz = map_.grid.shape
    header = f"MCVOL {nx} {ny} {nz} {map_.voxel_size_mm[0]:.6g}\n"
    fp.write(header.encode("ascii"))
    fp.write(np.asarray(map_.grid.T, dtype="<f4", order="C").tobytes())


def read_mcvol(fp: io.BufferedIOBase) -> tuple[np.ndarray, float]:
    """Read a raw dump; returns (grid [nx, ny, nz] float32, voxel_mm)."""
    header = fp.readline().decode("ascii").split()
    if len(header) != 5 or header[0] != "MCVOL":
        raise ValueError("not an MCVOL file")
    nx, ny, nz = (int(v) for v in header[1:4])
    voxel_mm = float(header[4])
    data = np.frombuffer(fp.read(4 * nx * ny * nz), dtype="<f4")
    if data.size != nx * ny * nz:
        raise ValueError("truncated MCVOL payload")
    return data.reshape(nz, ny, nx).T.copy(), voxel_mm
