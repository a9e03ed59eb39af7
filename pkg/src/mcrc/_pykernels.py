"""Pure-Python/NumPy implementations of the hot numerical loops.

Each function here has a twin of the same name and signature in the compiled
``_ckernels`` extension. The two must agree bit-for-bit: the arithmetic is
written so both perform the same floating-point operations in the same order.
"""

import math

import numpy as np


def superpose_aligned(amounts, kernel, steps_per_symbol, n_steps):
    """Sum shifted copies of ``kernel`` weighted by ``amounts``.

    ``out[k] = sum_n amounts[n] * kernel[k - n * steps_per_symbol]`` over the
    terms with a non-negative kernel index. Symbols are accumulated in order.
    """
    amounts = np.ascontiguousarray(amounts, dtype=np.float64)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    out = np.zeros(n_steps)
    for n, amount in enumerate(amounts):
        start = n * steps_per_symbol
        if start >= n_steps:
            break
        if amount == 0.0:
            continue
        out[start:] += amount * kernel[: n_steps - start]
    return out


def bind_recurrence(decay, b_inf, b0):
    """Run ``b[k+1] = b_inf[k] + (b[k] - b_inf[k]) * decay[k]`` from ``b0``."""
    decay = np.asarray(decay, dtype=np.float64).tolist()
    b_inf = np.asarray(b_inf, dtype=np.float64).tolist()
    out = [0.0] * (len(decay) + 1)
    b = float(b0)
    out[0] = b
    for k in range(len(decay)):
        target = b_inf[k]
        b = target + (b - target) * decay[k]
        out[k + 1] = b
    return np.array(out)


def mackey_glass(history, n_steps, dt, beta, gamma, power, tau_steps):
    """Fourth-order Runge-Kutta for the Mackey-Glass delay equation.

    ``history`` holds ``tau_steps + 1`` samples covering ``[-tau, 0]``. The
    delayed value at a half step is the mean of the two bracketing samples.
    Returns the ``n_steps + 1`` samples on ``[0, n_steps * dt]``.
    """
    hist = [float(v) for v in history]
    if len(hist) != tau_steps + 1:
        raise ValueError("history must hold tau_steps + 1 samples")
    x = hist + [0.0] * n_steps
    half = 0.5 * dt
    for i in range(tau_steps, tau_steps + n_steps):
        xi = x[i]
        d0 = x[i - tau_steps]
        d1 = x[i - tau_steps + 1]
        dh = 0.5 * (d0 + d1)
        k1 = beta * d0 / (1.0 + d0 ** power) - gamma * xi
        k2 = beta * dh / (1.0 + dh ** power) - gamma * (xi + half * k1)
        k3 = beta * dh / (1.0 + dh ** power) - gamma * (xi + half * k2)
        k4 = beta * d1 / (1.0 + d1 ** power) - gamma * (xi + dt * k3)
        x[i + 1] = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return np.array(x[tau_steps:])


# --- near-field particle block -------------------------------------------
# SplitMix64 counter generator; uniforms carry 53 random bits.

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0


class _SplitMix:
    __slots__ = ("state", "has_spare", "spare")

    def __init__(self, state, has_spare, spare):
        self.state = int(state) & _MASK64
        self.has_spare = bool(has_spare)
        self.spare = float(spare)

    def uniform(self):
        s = (self.state + _GAMMA) & _MASK64
        self.state = s
        z = ((s ^ (s >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        return (z >> 11) * _INV_2_53

    def normal(self):
        # Marsaglia polar method; the second variate is cached
        if self.has_spare:
            self.has_spare = False
            return self.spare
        while True:
            a = 2.0 * self.uniform() - 1.0
            b = 2.0 * self.uniform() - 1.0
            q = a * a + b * b
            if 0.0 < q < 1.0:
                break
        f = math.sqrt(-2.0 * math.log(q) / q)
        self.spare = b * f
        self.has_spare = True
        return a * f

    def binomial(self, n, p):
        if n <= 0 or p <= 0.0:
            return 0
        q = 1.0 - p
        pk = math.pow(q, n)
        if pk < 1e-200:
            k = 0
            for _ in range(n):
                if self.uniform() < p:
                    k += 1
            return k
        u = self.uniform()
        cdf = pk
        k = 0
        while u > cdf and k < n:
            pk *= (n - k) / (k + 1) * (p / q)
            k += 1
            cdf += pk
        return k


def _specular(x, y, z, vx, vy, vz, radius):
    """End point of the step ``(x, y, z) + v`` reflected specularly off the sphere.

    The straight-line step is mirrored about the surface normal at its first
    crossing. Returns ``(x, y, z, r)`` with ``r`` the final distance to center.
    """
    ex = x + vx
    ey = y + vy
    ez = z + vz
    A = vx * vx + vy * vy + vz * vz
    B = x * vx + y * vy + z * vz
    if A > 0.0 and B < 0.0:
        C = x * x + y * y + z * z - radius * radius
        disc = B * B - A * C
        if disc > 0.0:
            t = (-B - math.sqrt(disc)) / A
            if t <= 1.0:
                if t < 0.0:
                    t = 0.0
                hx = x + t * vx
                hy = y + t * vy
                hz = z + t * vz
                hr = math.sqrt(hx * hx + hy * hy + hz * hz)
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
    r = math.sqrt(ex * ex + ey * ey + ez * ez)
    if r < radius:
        # rounding guard: push back onto the surface
        if r > 0.0:
            f = radius * (1.0 + 1e-12) / r
            ex *= f
            ey *= f
            ez *= f
        else:
            ex = radius * (1.0 + 1e-12)
        r = math.sqrt(ex * ex + ey * ey + ez * ez)
    return ex, ey, ez, r


def near_field_block(pos, n_steps, sigma, radius, shell_outer, bind_coef, p_off,
                     n_receptors, bound, rng_state):
    """Step the near-field ligands ``n_steps`` times with binding and unbinding.

    ``pos`` is an ``(n, 3)`` array of positions relative to the receiver
    center. ``rng_state`` is ``(counter, has_spare, spare)``. Returns
    ``(positions, bound, bound_per_step, rng_state, particle_updates)``.
    """
    rng = _SplitMix(*rng_state)
    pts = [list(map(float, row)) for row in np.asarray(pos, dtype=np.float64).reshape(-1, 3)]
    trace = np.empty(n_steps, dtype=np.int64)
    updates = 0
    for step in range(n_steps):
        bound_start = bound
        cand = []
        for i, p in enumerate(pts):
            if sigma > 0.0:
                vx = sigma * rng.normal()
                vy = sigma * rng.normal()
                vz = sigma * rng.normal()
            else:
                vx = vy = vz = 0.0
            p[0], p[1], p[2], r = _specular(p[0], p[1], p[2], vx, vy, vz, radius)
            if r <= shell_outer:
                cand.append(i)
        updates += len(pts)
        n_free = n_receptors - bound
        if cand and n_free > 0 and bind_coef > 0.0:
            pb = -math.expm1(-bind_coef * n_free)
            hits = []
            for i in cand:
                v = rng.uniform()
                if v < pb:
                    hits.append((v, i))
            if len(hits) > n_free:
                hits = sorted(hits)[:n_free]
            if hits:
                gone = {i for _, i in hits}
                pts = [p for i, p in enumerate(pts) if i not in gone]
                bound += len(hits)
        k = rng.binomial(bound_start, p_off)
        bound -= k
        for _ in range(k):
            gx = rng.normal()
            gy = rng.normal()
            gz = rng.normal()
            norm = math.sqrt(gx * gx + gy * gy + gz * gz)
            f = shell_outer / norm
            pts.append([gx * f, gy * f, gz * f])
        trace[step] = bound
    out = np.array(pts, dtype=np.float64).reshape(-1, 3)
    return out, bound, trace, (rng.state, int(rng.has_spare), rng.spare), updates


def far_field_sync(pos, counts, sigmas, radius, shell_outer, margins, remove_radius, noise):
    """Move grouped particles by their level's composed step and regroup them.

    ``pos`` holds the rows of levels ``0 .. top`` back to back, ``counts[l]``
    rows for level ``l``. Level 0 rows are left in place (the near-field
    kernel has already stepped them); the ``i``-th row above level 0 moves by
    ``sigmas[l] * noise[i]``. Rows are reflected specularly off the sphere,
    dropped beyond ``remove_radius`` (if positive) and assigned the highest
    level ``l`` whose margin the gap to the shell exceeds. Returns
    ``(positions, counts, removed, particle_updates)`` with rows stably
    grouped by level.
    """
    pts = np.asarray(pos, dtype=np.float64).reshape(-1, 3)
    noise = np.asarray(noise, dtype=np.float64).reshape(-1, 3)
    counts = [int(c) for c in counts]
    top = len(counts) - 1
    buckets = [[] for _ in range(top + 1)]
    removed = 0
    updates = 0
    row = 0
    for lev in range(top + 1):
        sig = float(sigmas[lev])
        for _ in range(counts[lev]):
            x, y, z = float(pts[row, 0]), float(pts[row, 1]), float(pts[row, 2])
            vx = vy = vz = 0.0
            if lev > 0:
                k = row - counts[0]
                updates += 1
                vx = sig * float(noise[k, 0])
                vy = sig * float(noise[k, 1])
                vz = sig * float(noise[k, 2])
            row += 1
            x, y, z, r = _specular(x, y, z, vx, vy, vz, radius)
            if remove_radius > 0.0 and r > remove_radius:
                removed += 1
                continue
            gap = r - shell_outer
            new = 0
            for l in range(1, top + 1):
                if gap > margins[l]:
                    new = l
            buckets[new].append((x, y, z))
    flat = [p for b in buckets for p in b]
    out = np.array(flat, dtype=np.float64).reshape(-1, 3)
    new_counts = np.array([len(b) for b in buckets], dtype=np.int64)
    return out, new_counts, removed, updates
