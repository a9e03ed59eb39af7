# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the loops in ``_pykernels``. Keep both in lockstep."""

import numpy as np
from libc.math cimport pow, sqrt, log, expm1
from libc.stdint cimport uint64_t


def superpose_aligned(amounts, kernel, Py_ssize_t steps_per_symbol, Py_ssize_t n_steps):
    cdef const double[::1] a = np.ascontiguousarray(amounts, dtype=np.float64)
    cdef const double[::1] g = np.ascontiguousarray(kernel, dtype=np.float64)
    out_arr = np.zeros(n_steps)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t n, k, start
    cdef double amount
    for n in range(a.shape[0]):
        start = n * steps_per_symbol
        if start >= n_steps:
            break
        amount = a[n]
        if amount == 0.0:
            continue
        for k in range(start, n_steps):
            out[k] += amount * g[k - start]
    return out_arr


def bind_recurrence(decay, b_inf, double b0):
    cdef const double[::1] dec = np.ascontiguousarray(decay, dtype=np.float64)
    cdef const double[::1] tgt = np.ascontiguousarray(b_inf, dtype=np.float64)
    cdef Py_ssize_t n = dec.shape[0]
    out_arr = np.empty(n + 1)
    cdef double[::1] out = out_arr
    cdef double b = b0
    cdef double target
    cdef Py_ssize_t k
    out[0] = b
    for k in range(n):
        target = tgt[k]
        b = target + (b - target) * dec[k]
        out[k + 1] = b
    return out_arr


def mackey_glass(history, Py_ssize_t n_steps, double dt, double beta, double gamma,
                 double power, Py_ssize_t tau_steps):
    hist = np.ascontiguousarray(history, dtype=np.float64)
    if hist.shape[0] != tau_steps + 1:
        raise ValueError("history must hold tau_steps + 1 samples")
    x_arr = np.empty(tau_steps + 1 + n_steps)
    x_arr[: tau_steps + 1] = hist
    cdef double[::1] x = x_arr
    cdef double half = 0.5 * dt
    cdef double xi, d0, d1, dh, k1, k2, k3, k4
    cdef Py_ssize_t i
    for i in range(tau_steps, tau_steps + n_steps):
        xi = x[i]
        d0 = x[i - tau_steps]
        d1 = x[i - tau_steps + 1]
        dh = 0.5 * (d0 + d1)
        k1 = beta * d0 / (1.0 + pow(d0, power)) - gamma * xi
        k2 = beta * dh / (1.0 + pow(dh, power)) - gamma * (xi + half * k1)
        k3 = beta * dh / (1.0 + pow(dh, power)) - gamma * (xi + half * k2)
        k4 = beta * d1 / (1.0 + pow(d1, power)) - gamma * (xi + dt * k3)
        x[i + 1] = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x_arr[tau_steps:].copy()


# --- near-field particle block (SplitMix64 + polar normals, same as _pykernels) ---

cdef double _INV_2_53 = 1.0 / 9007199254740992.0


cdef struct SplitMix:
    uint64_t state
    int has_spare
    double spare


cdef inline double _uniform(SplitMix* g) noexcept nogil:
    cdef uint64_t z
    g.state = g.state + <uint64_t>0x9E3779B97F4A7C15ULL
    z = g.state
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    z = z ^ (z >> 31)
    return <double>(z >> 11) * _INV_2_53


cdef inline double _normal(SplitMix* g) noexcept nogil:
    cdef double a, b, q, f
    if g.has_spare:
        g.has_spare = 0
        return g.spare
    while True:
        a = 2.0 * _uniform(g) - 1.0
        b = 2.0 * _uniform(g) - 1.0
        q = a * a + b * b
        if 0.0 < q < 1.0:
            break
    f = sqrt(-2.0 * log(q) / q)
    g.spare = b * f
    g.has_spare = 1
    return a * f


cdef long _binomial(SplitMix* g, long n, double p) noexcept nogil:
    cdef double q, pk, u, cdf
    cdef long k, i
    if n <= 0 or p <= 0.0:
        return 0
    q = 1.0 - p
    pk = pow(q, <double>n)
    if pk < 1e-200:
        k = 0
        for i in range(n):
            if _uniform(g) < p:
                k += 1
        return k
    u = _uniform(g)
    cdf = pk
    k = 0
    while u > cdf and k < n:
        pk *= (<double>(n - k) / <double>(k + 1)) * (p / q)
        k += 1
        cdf += pk
    return k


cdef inline double _specular(double* p, double vx, double vy, double vz,
                             double radius) noexcept nogil:
    cdef double x = p[0], y = p[1], z = p[2]
    cdef double ex = x + vx, ey = y + vy, ez = z + vz
    cdef double A = vx * vx + vy * vy + vz * vz
    cdef double B = x * vx + y * vy + z * vz
    cdef double C, disc, t, hx, hy, hz, hr, nx, ny, nz, rest, wx, wy, wz, dot, r, f
    if A > 0.0 and B < 0.0:
        C = x * x + y * y + z * z - radius * radius
        disc = B * B - A * C
        if disc > 0.0:
            t = (-B - sqrt(disc)) / A
            if t <= 1.0:
                if t < 0.0:
                    t = 0.0
                hx = x + t * vx
                hy = y + t * vy
                hz = z + t * vz
                hr = sqrt(hx * hx + hy * hy + hz * hz)
                nx = hx / hr
                ny = hy / hr
                nz = hz / hr
                rest = 1.0 - t
                wx = rest * vx
                wy = rest * vy
                wz = rest * vz
                dot = 2.0 * (wx * nx + wy * ny + wz * nz)
                ex = hx + (wx - dot * nx)
                ey = hy + (wy - dot * ny)
                ez = hz + (wz - dot * nz)
    r = sqrt(ex * ex + ey * ey + ez * ez)
    if r < radius:
        if r > 0.0:
            f = radius * (1.0 + 1e-12) / r
            ex *= f
            ey *= f
            ez *= f
        else:
            ex = radius * (1.0 + 1e-12)
        r = sqrt(ex * ex + ey * ey + ez * ez)
    p[0] = ex
    p[1] = ey
    p[2] = ez
    return r


def near_field_block(pos, Py_ssize_t n_steps, double sigma, double radius, double shell_outer,
                     double bind_coef, double p_off, long n_receptors, long bound, rng_state):
    src = np.ascontiguousarray(pos, dtype=np.float64).reshape(-1, 3)
    cdef Py_ssize_t n = src.shape[0]
    # ligands in the block plus receptor occupancy is conserved
    cdef Py_ssize_t cap = n + bound + 1
    buf = np.empty((cap, 3))
    buf[:n] = src
    cdef double[:, ::1] p = buf
    cand_arr = np.empty(cap, dtype=np.intp)
    hit_idx_arr = np.empty(cap, dtype=np.intp)
    hit_v_arr = np.empty(cap)
    keep_arr = np.empty(cap, dtype=np.uint8)
    cdef Py_ssize_t[::1] cand = cand_arr
    cdef Py_ssize_t[::1] hit_idx = hit_idx_arr
    cdef double[::1] hit_v = hit_v_arr
    cdef unsigned char[::1] keep = keep_arr
    trace_arr = np.empty(n_steps, dtype=np.int64)
    cdef long long[::1] trace = trace_arr
    cdef SplitMix g
    g.state = <uint64_t>int(rng_state[0])
    g.has_spare = 1 if rng_state[1] else 0
    g.spare = float(rng_state[2])
    cdef Py_ssize_t step, i, j, m, ncand, nhit, best, w
    cdef long bound_start, n_free, k
    cdef double r, pb, v, gx, gy, gz, norm, f, tmp_v, vx, vy, vz
    cdef Py_ssize_t tmp_i
    cdef long long updates = 0
    for step in range(n_steps):
        bound_start = bound
        ncand = 0
        for i in range(n):
            vx = 0.0
            vy = 0.0
            vz = 0.0
            if sigma > 0.0:
                vx = sigma * _normal(&g)
                vy = sigma * _normal(&g)
                vz = sigma * _normal(&g)
            r = _specular(&p[i, 0], vx, vy, vz, radius)
            if r <= shell_outer:
                cand[ncand] = i
                ncand += 1
        updates += n
        n_free = n_receptors - bound
        if ncand > 0 and n_free > 0 and bind_coef > 0.0:
            pb = -expm1(-bind_coef * <double>n_free)
            nhit = 0
            for j in range(ncand):
                v = _uniform(&g)
                if v < pb:
                    hit_idx[nhit] = cand[j]
                    hit_v[nhit] = v
                    nhit += 1
            if nhit > n_free:
                # selection sort by (v, index) up to n_free entries
                for j in range(n_free):
                    best = j
                    for m in range(j + 1, nhit):
                        if hit_v[m] < hit_v[best] or (hit_v[m] == hit_v[best] and hit_idx[m] < hit_idx[best]):
                            best = m
                    tmp_v = hit_v[j]; hit_v[j] = hit_v[best]; hit_v[best] = tmp_v
                    tmp_i = hit_idx[j]; hit_idx[j] = hit_idx[best]; hit_idx[best] = tmp_i
                nhit = n_free
            if nhit > 0:
                for i in range(n):
                    keep[i] = 1
                for j in range(nhit):
                    keep[hit_idx[j]] = 0
                w = 0
                for i in range(n):
                    if keep[i]:
                        if w != i:
                            p[w, 0] = p[i, 0]
                            p[w, 1] = p[i, 1]
                            p[w, 2] = p[i, 2]
                        w += 1
                n = w
                bound += nhit
        k = _binomial(&g, bound_start, p_off)
        bound -= k
        for j in range(k):
            gx = _normal(&g)
            gy = _normal(&g)
            gz = _normal(&g)
            norm = sqrt(gx * gx + gy * gy + gz * gz)
            f = shell_outer / norm
            p[n, 0] = gx * f
            p[n, 1] = gy * f
            p[n, 2] = gz * f
            n += 1
        trace[step] = bound
    return (buf[:n].copy(), bound, trace_arr, (int(g.state), int(g.has_spare), g.spare), int(updates))


def far_field_sync(pos, counts, sigmas, double radius, double shell_outer, margins,
                   double remove_radius, noise):
    src = np.ascontiguousarray(pos, dtype=np.float64).reshape(-1, 3)
    cdef double[:, ::1] p = src
    cdef double[:, ::1] nz = np.ascontiguousarray(noise, dtype=np.float64).reshape(-1, 3)
    cdef long long[::1] cnt = np.ascontiguousarray(counts, dtype=np.int64)
    cdef double[::1] sig = np.ascontiguousarray(sigmas, dtype=np.float64)
    cdef double[::1] mar = np.ascontiguousarray(margins, dtype=np.float64)
    cdef Py_ssize_t top = cnt.shape[0] - 1
    cdef Py_ssize_t n = p.shape[0]
    if nz.shape[0] < n - cnt[0]:
        raise ValueError("noise has fewer rows than the moving levels")
    tmp_arr = np.empty((n, 3))
    lev_arr = np.empty(n, dtype=np.int64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef long long[::1] lev_of = lev_arr
    new_counts_arr = np.zeros(top + 1, dtype=np.int64)
    cdef long long[::1] nc = new_counts_arr
    cdef Py_ssize_t lev, c, row = 0, kept = 0, l, i, k
    cdef long long removed = 0, updates = 0
    cdef long long new
    cdef double s, r, gap, vx, vy, vz
    cdef double xyz[3]
    for lev in range(top + 1):
        s = sig[lev]
        for c in range(cnt[lev]):
            xyz[0] = p[row, 0]; xyz[1] = p[row, 1]; xyz[2] = p[row, 2]
            vx = 0.0
            vy = 0.0
            vz = 0.0
            if lev > 0:
                k = row - cnt[0]
                updates += 1
                vx = s * nz[k, 0]
                vy = s * nz[k, 1]
                vz = s * nz[k, 2]
            row += 1
            r = _specular(xyz, vx, vy, vz, radius)
            if remove_radius > 0.0 and r > remove_radius:
                removed += 1
                continue
            gap = r - shell_outer
            new = 0
            for l in range(1, top + 1):
                if gap > mar[l]:
                    new = l
            tmp[kept, 0] = xyz[0]; tmp[kept, 1] = xyz[1]; tmp[kept, 2] = xyz[2]
            lev_of[kept] = new
            nc[new] += 1
            kept += 1
    # stable counting sort by level
    starts = np.zeros(top + 1, dtype=np.int64)
    cdef long long[::1] st = starts
    for l in range(1, top + 1):
        st[l] = st[l - 1] + nc[l - 1]
    out_arr = np.empty((kept, 3))
    cdef double[:, ::1] out = out_arr
    cdef long long dst
    for i in range(kept):
        dst = st[lev_of[i]]
        st[lev_of[i]] += 1
        out[dst, 0] = tmp[i, 0]; out[dst, 1] = tmp[i, 1]; out[dst, 2] = tmp[i, 2]
    return out_arr, new_counts_arr, int(removed), int(updates)
