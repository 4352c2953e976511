# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled photon transport kernel.

Must stay expression-for-expression identical to ``reference.py`` so the
two backends produce bit-identical grids for the same packet range.
"""

from libc.math cimport log, sqrt, sin, cos, INFINITY
from libc.stdint cimport uint64_t

BACKEND_NAME = "cython"

cdef double _EPS_CM = 1e-9
cdef double _COS_NEAR_AXIAL = 0.99999
cdef double _TWO_PI = 6.283185307179586476925286766559
cdef double _INV_2_53 = 1.0 / 9007199254740992.0
cdef uint64_t _GAMMA = 0x9E3779B97F4A7C15u
cdef uint64_t _STREAM_KEY = 0xD1B54A32D192ED03u


cdef inline uint64_t mix64(uint64_t z) nogil:
    z ^= z >> 30
    z *= 0xBF58476D1CE4E5B9u
    z ^= z >> 27
    z *= 0x94D049BB133111EBu
    z ^= z >> 31
    return z


cdef inline uint64_t stream_init(uint64_t seed, uint64_t index) nogil:
    return mix64(seed ^ mix64((index + 1u) * _STREAM_KEY))


cdef inline uint64_t next_u64(uint64_t* state) nogil:
    state[0] += _GAMMA
    return mix64(state[0])


cdef inline double uniform(uint64_t* state) nogil:
    return <double>(next_u64(state) >> 11) * _INV_2_53


cdef inline double uniform_open(uint64_t* state) nogil:
    return <double>((next_u64(state) >> 11) + 1u) * _INV_2_53


cdef inline double hg_cos(double g, double u) nogil:
    cdef double tmp, cos_t
    if g == 0.0:
        return 2.0 * u - 1.0
    tmp = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
    cos_t = (1.0 + g * g - tmp * tmp) / (2.0 * g)
    if cos_t > 1.0:
        cos_t = 1.0
    elif cos_t < -1.0:
        cos_t = -1.0
    return cos_t


def run_chunk(
    const unsigned char[:, :, ::1] labels,
    const double[::1] mua,
    const double[::1] mus,
    const double[::1] g_tab,
    voxel_cm,
    double beam_cx_cm,
    double beam_cy_cm,
    double beam_r_cm,
    seed,
    start_index,
    count,
    double roulette_threshold,
    long roulette_m,
    double[:, :, ::1] grid,
):
    """Trace packets [start_index, start_index+count); returns
    (escaped_weight, clipped_launches), both unnormalized."""
    cdef Py_ssize_t nx = labels.shape[0]
    cdef Py_ssize_t ny = labels.shape[1]
    cdef Py_ssize_t nz = labels.shape[2]
    cdef double vx = voxel_cm[0]
    cdef double vy = voxel_cm[1]
    cdef double vz = voxel_cm[2]
    cdef double sx = nx * vx
    cdef double sy = ny * vy
    cdef double sz = nz * vz
    cdef double inv_vx = 1.0 / vx
    cdef double inv_vy = 1.0 / vy
    cdef double inv_vz = 1.0 / vz
    cdef uint64_t seed_u = <uint64_t>(<unsigned long long>(seed & 0xFFFFFFFFFFFFFFFF))
    cdef uint64_t idx0 = <uint64_t>(<unsigned long long>start_index)
    cdef uint64_t n = <uint64_t>(<unsigned long long>count)
    cdef double inv_m = 1.0 / roulette_m
    cdef double escaped = 0.0
    cdef long clipped = 0

    cdef uint64_t idx, state
    cdef double r, th, px, py, pz, ux, uy, uz, w
    cdef double inv_ux, inv_uy, inv_uz
    cdef double s, mut, db, t, d, d_end, dw
    cdef double cos_t, phi, sin_t, cos_p, sin_p, tmp_d, onx, ony, onz, norm
    cdef Py_ssize_t ix, iy, iz
    cdef int lab, i
    cdef bint alive

    # Per-label tables so the hot loop divides as little as possible.
    cdef int n_lab = mua.shape[0]
    cdef double[256] mut_tab
    cdef double[256] inv_mut_tab
    cdef double[256] albedo_tab
    if n_lab > 256:
        raise ValueError("too many tissue labels")
    for i in range(n_lab):
        mut_tab[i] = mua[i] + mus[i]
        inv_mut_tab[i] = 1.0 / mut_tab[i] if mut_tab[i] > 0.0 else 0.0
        albedo_tab[i] = mua[i] / mut_tab[i] if mut_tab[i] > 0.0 else 0.0

    with nogil:
        for idx in range(idx0, idx0 + n):
            state = stream_init(seed_u, idx)

            r = beam_r_cm * sqrt(uniform(&state))
            th = _TWO_PI * uniform(&state)
            px = beam_cx_cm + r * cos(th)
            py = beam_cy_cm + r * sin(th)
            pz = 0.0
            ux = 0.0
            uy = 0.0
            uz = 1.0
            w = 1.0
            inv_ux = 0.0
            inv_uy = 0.0
            inv_uz = 1.0

            if px < 0.0 or px >= sx or py < 0.0 or py >= sy:
                clipped += 1
                escaped += w
                continue

            alive = True
            lab = 0
            while alive:
                s = -log(uniform_open(&state))

                while True:
                    if not (0.0 <= px < sx and 0.0 <= py < sy and 0.0 <= pz < sz):
                        escaped += w
                        alive = False
                        break
                    ix = <Py_ssize_t>(px * inv_vx)
                    iy = <Py_ssize_t>(py * inv_vy)
                    iz = <Py_ssize_t>(pz * inv_vz)
                    if ix >= nx: ix = nx - 1
                    if iy >= ny: iy = ny - 1
                    if iz >= nz: iz = nz - 1
                    lab = labels[ix, iy, iz]
                    mut = mut_tab[lab]

                    db = INFINITY
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
                        d = db + _EPS_CM
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

                cos_t = hg_cos(g_tab[lab], uniform(&state))
                phi = _TWO_PI * uniform(&state)

                sin_t = 1.0 - cos_t * cos_t
                if sin_t < 0.0:
                    sin_t = 0.0
                sin_t = sqrt(sin_t)
                cos_p = cos(phi)
                sin_p = sin(phi)
                if uz > _COS_NEAR_AXIAL or uz < -_COS_NEAR_AXIAL:
                    onx = sin_t * cos_p
                    ony = sin_t * sin_p
                    onz = cos_t if uz >= 0.0 else -cos_t
                else:
                    tmp_d = sqrt(1.0 - uz * uz)
                    onx = sin_t * (ux * uz * cos_p - uy * sin_p) / tmp_d + ux * cos_t
                    ony = sin_t * (uy * uz * cos_p + ux * sin_p) / tmp_d + uy * cos_t
                    onz = -sin_t * cos_p * tmp_d + uz * cos_t
                norm = sqrt(onx * onx + ony * ony + onz * onz)
                ux = onx / norm
                uy = ony / norm
                uz = onz / norm
                inv_ux = 1.0 / ux if ux != 0.0 else INFINITY
                inv_uy = 1.0 / uy if uy != 0.0 else INFINITY
                inv_uz = 1.0 / uz if uz != 0.0 else INFINITY

                if w < roulette_threshold:
                    if uniform(&state) < inv_m:
                        w *= roulette_m
                    else:
                        alive = False

    return escaped, clipped
