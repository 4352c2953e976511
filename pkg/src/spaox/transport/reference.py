"""Pure-Python photon transport engine (fallback backend).

Mirrors the compiled Cython kernel expression for expression so both
backends produce bit-identical absorbed-energy grids for the same
(seed, packet range). Orders of magnitude slower; intended for
environments without a compiler and as a correctness cross-check.
"""

from __future__ import annotations

import math

from ._rng import PacketStream

BACKEND_NAME = "python"

_EPS_CM = 1e-9  # nudge past voxel boundaries
_COS_NEAR_AXIAL = 0.99999


def sample_hg_scalar(g: float, u: float) -> float:
    """Henyey-Greenstein scattering cosine for one uniform draw."""
    if g == 0.0:
        return 2.0 * u - 1.0
    tmp = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
    cos_t = (1.0 + g * g - tmp * tmp) / (2.0 * g)
    if cos_t > 1.0:
        cos_t = 1.0
    elif cos_t < -1.0:
        cos_t = -1.0
    return cos_t


def spin_scalar(ux, uy, uz, cos_t, phi):
    """Rotate a unit direction by scattering angle cos_t and azimuth phi."""
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    cos_p = math.cos(phi)
    sin_p = math.sin(phi)
    if abs(uz) > _COS_NEAR_AXIAL:
        nx = sin_t * cos_p
        ny = sin_t * sin_p
        nz = cos_t if uz >= 0.0 else -cos_t
    else:
        tmp = math.sqrt(1.0 - uz * uz)
        nx = sin_t * (ux * uz * cos_p - uy * sin_p) / tmp + ux * cos_t
        ny = sin_t * (uy * uz * cos_p + ux * sin_p) / tmp + uy * cos_t
        nz = -sin_t * cos_p * tmp + uz * cos_t
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    return nx / norm, ny / norm, nz / norm


def run_chunk(
    labels,          # uint8 [nx, ny, nz]
    mua,             # float64 per label, cm^-1
    mus,             # float64 per label, cm^-1
    g_tab,           # float64 per label
    voxel_cm,        # (vx, vy, vz)
    beam_cx_cm,
    beam_cy_cm,
    beam_r_cm,
    seed,
    start_index,
    count,
    roulette_threshold,
    roulette_m,
    grid,            # float64 [nx, ny, nz], accumulated in place
):
    """Trace packets [start_index, start_index+count); returns
    (escaped_weight, clipped_launches), both unnormalized."""
    nx, ny, nz = labels.shape
    vx, vy, vz = voxel_cm
    sx, sy, sz = nx * vx, ny * vy, nz * vz
    inv_vx, inv_vy, inv_vz = 1.0 / vx, 1.0 / vy, 1.0 / vz
    two_pi = 2.0 * math.pi
    inv_m = 1.0 / roulette_m
    escaped = 0.0
    clipped = 0

    # Per-label tables so the hot loop divides as little as possible.
    n_lab = len(mua)
    mut_tab = [mua[i] + mus[i] for i in range(n_lab)]
    inv_mut_tab = [1.0 / m if m > 0.0 else 0.0 for m in mut_tab]
    albedo_tab = [mua[i] / mut_tab[i] if mut_tab[i] > 0.0 else 0.0 for i in range(n_lab)]

    for idx in range(start_index, start_index + count):
        rng = PacketStream(seed, idx)

        # Launch uniformly over the beam disk, heading +z.
        r = beam_r_cm * math.sqrt(rng.uniform())
        th = two_pi * rng.uniform()
        px = beam_cx_cm + r * math.cos(th)
        py = beam_cy_cm + r * math.sin(th)
        pz = 0.0
        ux, uy, uz = 0.0, 0.0, 1.0
        w = 1.0

        inv_ux = inv_uy = 0.0
        inv_uz = 1.0

        if px < 0.0 or px >= sx or py < 0.0 or py >= sy:
            clipped += 1
            escaped += w
            continue

        alive = True
        lab = 0
        while alive:
            s = -math.log(rng.uniform_open())  # dimensionless step

            while True:
                if not (0.0 <= px < sx and 0.0 <= py < sy and 0.0 <= pz < sz):
                    escaped += w
                    alive = False
                    break
                ix = int(px * inv_vx)
                iy = int(py * inv_vy)
                iz = int(pz * inv_vz)
                if ix >= nx: ix = nx - 1
                if iy >= ny: iy = ny - 1
                if iz >= nz: iz = nz - 1
                lab = labels[ix, iy, iz]
                mut = mut_tab[lab]

                # Distance to the nearest voxel boundary along the ray.
                db = math.inf
                if ux > 0.0:
                    db = ((ix + 1) * vx - px) * inv_ux
                elif ux < 0.0:
                    db = (ix * vx - px) * inv_ux
                if uy > 0.0:
                    t = ((iy + 1) * vy - py) * inv_uy
                    if t < db: db = t
                elif uy < 0.0:
                    t = (iy * vy - py) * inv_uy
                    if t < db: db = t
                if uz > 0.0:
                    t = ((iz + 1) * vz - pz) * inv_uz
                    if t < db: db = t
                elif uz < 0.0:
                    t = (iz * vz - pz) * inv_uz
                    if t < db: db = t

                if mut <= 0.0:
                    d = db + _EPS_CM  # transparent voxel: cross it for free
                    px += ux * d
                    py += uy * d
                    pz += uz * d
                    continue

                d_end = s * inv_mut_tab[lab]
                if db < d_end:
                    d = db + _EPS_CM
                    px += ux * d
                    py += uy * d
                    pz += uz * d
                    s -= d * mut
                else:
                    px += ux * d_end
                    py += uy * d_end
                    pz += uz * d_end
                    dw = w * albedo_tab[lab]
                    grid[ix, iy, iz] += dw
                    w -= dw
                    if w <= 0.0:
                        alive = False
                    break

            if not alive:
                break

            # Scatter (Henyey-Greenstein) about the current direction.
            cos_t = sample_hg_scalar(g_tab[lab], rng.uniform())
            phi = two_pi * rng.uniform()
            ux, uy, uz = spin_scalar(ux, uy, uz, cos_t, phi)
            inv_ux = 1.0 / ux if ux != 0.0 else math.inf
            inv_uy = 1.0 / uy if uy != 0.0 else math.inf
            inv_uz = 1.0 / uz if uz != 0.0 else math.inf

            # Russian roulette for low-weight packets.
            if w < roulette_threshold:
                if rng.uniform() < inv_m:
                    w *= roulette_m
                else:
                    alive = False

    return escaped, clipped
