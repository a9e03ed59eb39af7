"""Particle-based stochastic channel.

Ligands are point particles doing Brownian motion around a reflective
spherical receiver. A thin sensing shell around the sphere hosts binding:
each ligand ending a step inside the shell binds with probability
``1 - exp(-k_on * n_free * dt / V_shell)``, where ``n_free`` counts free
receptors, which reproduces the mean-field binding rate
``N_R k_on c (1 - b)``. Bound receptors release their ligand back onto the
outer shell surface at rate ``k_off``. Steps that cut through the sphere are
reflected specularly at the crossing point, which keeps a uniform density
uniform however large the step is relative to the radius.

``run_stochastic`` uses a multi-rate scheme: a particle whose gap to the
shell exceeds ``SAFETY_SIGMAS`` standard deviations of a ``4**l``-step
displacement is moved once per ``4**l`` steps with the composed Gaussian
displacement. Near particles move every step. The composed displacement has
exactly the same distribution as the individual steps, so only the rare
far-to-shell excursions within a block are lost.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .channel import encode_inputs
from .errors import ResourceCapError, ValidationError
from .receptor import BoundFractionTrace

SAFETY_SIGMAS = 5.0
N_LEVELS = 7  # up to 4**6 = 4096 steps per far-field move


@dataclass(frozen=True)
class StochasticConfig:
    """Settings for the particle engine.

    Attributes:
        receiver_radius: radius of the reflective receiver sphere (m).
        num_receptors: receptors on the receiver.
        dt_sim: particle time step (s); ``None`` means ``T / steps_per_symbol``.
        rng_seed: base seed; replicate ``r`` uses ``rng_seed + r``.
        num_replicates: independent runs averaged into the reported trace.
        shell_fraction: sensing-shell thickness as a fraction of the radius.
        steps_per_symbol: particle steps per symbol when ``dt_sim`` is unset.
        removal_factor: drop particles beyond ``removal_factor * d`` (None = keep all).
        max_particle_steps_per_second: particle updates allowed per simulated second.
        max_particles: cap on the number of particles alive at once.
    """

    receiver_radius: float = 0.5e-6
    num_receptors: int = 1000
    dt_sim: float = None
    rng_seed: int = 0
    num_replicates: int = 3
    shell_fraction: float = 0.1
    steps_per_symbol: int = 2000
    removal_factor: float = None
    max_particle_steps_per_second: float = 5e6
    max_particles: int = 20_000_000

    def __post_init__(self):
        if not self.receiver_radius > 0:
            raise ValidationError("receiver_radius must be positive")
        if int(self.num_receptors) != self.num_receptors or self.num_receptors < 1:
            raise ValidationError("num_receptors must be a positive integer")
        if self.dt_sim is not None and not self.dt_sim > 0:
            raise ValidationError("dt_sim must be positive")
        if int(self.num_replicates) != self.num_replicates or self.num_replicates < 1:
            raise ValidationError("num_replicates must be a positive integer")
        if not self.shell_fraction > 0:
            raise ValidationError("shell_fraction must be positive")
        if int(self.steps_per_symbol) != self.steps_per_symbol or self.steps_per_symbol < 1:
            raise ValidationError("steps_per_symbol must be a positive integer")
        if self.removal_factor is not None and not self.removal_factor > 1:
            raise ValidationError("removal_factor must exceed 1")

    @property
    def shell_thickness(self):
        return self.receiver_radius * self.shell_fraction

    @property
    def shell_outer(self):
        return self.receiver_radius + self.shell_thickness

    @property
    def shell_volume(self):
        return 4.0 / 3.0 * math.pi * (self.shell_outer**3 - self.receiver_radius**3)

    def step_size(self, params):
        """Time step and number of steps per symbol for ``params``."""
        T = params.symbol_duration_T
        if self.dt_sim is None:
            return T / self.steps_per_symbol, int(self.steps_per_symbol)
        n = max(1, int(round(T / self.dt_sim)))
        return T / n, n

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ParticleState:
    """Free ligand positions relative to the receiver center, plus bound count."""

    positions: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    bound_count: int = 0
    time: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "positions", pos)

    @property
    def num_free(self):
        return self.positions.shape[0]


def _binding_probability(params, config, n_free, dt):
    if n_free <= 0 or params.k_on == 0:
        return 0.0
    return -math.expm1(-params.k_on * n_free * dt / config.shell_volume)


def _reflect(start, disp, radius):
    """End points of the steps ``start + disp`` after specular reflection.

    A step whose straight-line path meets the sphere is mirrored about the
    surface normal at the first crossing. Returns ``(end, r)``.
    """
    end = start + disp
    A = np.einsum("ij,ij->i", disp, disp)
    B = np.einsum("ij,ij->i", start, disp)
    C = np.einsum("ij,ij->i", start, start) - radius * radius
    disc = B * B - A * C
    hit = (A > 0) & (B < 0) & (disc > 0)
    if np.any(hit):
        t = np.full(A.shape, 2.0)
        t[hit] = (-B[hit] - np.sqrt(disc[hit])) / A[hit]
        hit &= t <= 1.0
        th = np.maximum(t[hit], 0.0)[:, None]
        h = start[hit] + th * disp[hit]
        n = h / np.linalg.norm(h, axis=1)[:, None]
        w = (1.0 - th) * disp[hit]
        dot = 2.0 * np.einsum("ij,ij->i", w, n)[:, None]
        end[hit] = h + (w - dot * n)
    r = np.sqrt(np.einsum("ij,ij->i", end, end))
    inside = r < radius
    if np.any(inside):
        # rounding guard
        ri = r[inside]
        safe = np.where(ri > 0, ri, 1.0)
        p = end[inside] * (radius * (1.0 + 1e-12) / safe)[:, None]
        p[ri == 0] = np.array([radius * (1.0 + 1e-12), 0.0, 0.0])
        end[inside] = p
        r[inside] = np.sqrt(np.einsum("ij,ij->i", p, p))
    return end, r


def _bind(pos, r, params, config, bound, dt, rng):
    """Bind shell candidates; return (surviving positions, surviving radii, n_bound)."""
    cand = np.flatnonzero(r <= config.shell_outer)
    n_free = config.num_receptors - bound
    if cand.size == 0 or n_free <= 0:
        return pos, r, 0
    p = _binding_probability(params, config, n_free, dt)
    if p <= 0.0:
        return pos, r, 0
    order = rng.permutation(cand)
    hits = order[rng.random(order.size) < p][:n_free]
    if hits.size == 0:
        return pos, r, 0
    keep = np.ones(pos.shape[0], dtype=bool)
    keep[hits] = False
    return pos[keep], r[keep], int(hits.size)


def _unbind(params, config, bound, dt, rng):
    """Released ligands placed uniformly on the outer shell surface."""
    if bound == 0 or params.k_off == 0:
        return np.empty((0, 3))
    n = int(rng.binomial(bound, -math.expm1(-params.k_off * dt)))
    if n == 0:
        return np.empty((0, 3))
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v * config.shell_outer


def step_particles(state, params, config, rng, dt=None):
    """Advance every free ligand by one step and apply binding and unbinding."""
    dt = config.step_size(params)[0] if dt is None else dt
    disp = np.zeros_like(state.positions)
    if params.diffusion_D > 0 and disp.shape[0]:
        disp = math.sqrt(2.0 * params.diffusion_D * dt) * rng.standard_normal(disp.shape)
    pos, r = _reflect(state.positions, disp, config.receiver_radius)
    bound0 = state.bound_count
    pos, r, n_bound = _bind(pos, r, params, config, bound0, dt, rng)
    released = _unbind(params, config, bound0, dt, rng)
    bound = bound0 + n_bound - released.shape[0]
    if released.shape[0]:
        pos = np.vstack([pos, released])
    total_before = state.num_free + bound0
    if pos.shape[0] + bound != total_before:
        raise AssertionError("particle count not conserved")
    return ParticleState(pos, bound, state.time + dt)


def release_pulse(state, u_n, params, rng=None):
    """Add ``round(u_n * n_max)`` ligands at the transmitter, distance ``d`` away."""
    if not 0.0 <= u_n <= 1.0:
        raise ValidationError(f"input {u_n!r} outside [0, 1]")
    n = int(math.floor(u_n * params.n_max + 0.5))
    if n == 0:
        return state
    new = np.zeros((n, 3))
    new[:, 0] = params.distance_d
    return ParticleState(np.vstack([state.positions, new]), state.bound_count, state.time)


def pulse_count(u_n, params):
    return int(math.floor(u_n * params.n_max + 0.5))


class _MultiRate:
    """Particle populations grouped by how many steps they may skip.

    Level 0 holds the ligands near the shell; they are stepped one step at a
    time by the compiled (or fallback) near-field kernel, which also handles
    binding and unbinding. Level ``l > 0`` ligands move once every ``4**l``
    steps with the composed displacement and are regrouped at those sync
    points.
    """

    def __init__(self, params, config, dt, seed, backend=None):
        self.params, self.config, self.dt = params, config, dt
        D = params.diffusion_D
        self.K = [4**l for l in range(N_LEVELS)]
        self.sigma = [math.sqrt(2.0 * D * k * dt) for k in self.K]
        self.margin = [SAFETY_SIGMAS * s for s in self.sigma]
        self.levels = [np.empty((0, 3)) for _ in self.K]
        self.bound = 0
        self.removed = 0
        self.released = 0
        self.updates = 0
        self.remove_radius = (
            None if config.removal_factor is None else config.removal_factor * params.distance_d
        )
        # near-field kernel draws from its own SplitMix64 stream; far-field
        # displacements come in bulk from a PCG64 generator
        kernel_seq, bulk_seq = np.random.SeedSequence(seed).spawn(2)
        self.rng_state = (int(kernel_seq.generate_state(1, np.uint64)[0]), 0, 0.0)
        self.rng = np.random.Generator(np.random.PCG64(bulk_seq))
        self.kernels = _backend.get(backend)
        self.bind_coef = params.k_on * dt / config.shell_volume
        self.p_off = -math.expm1(-params.k_off * dt)

    def top_level(self, step):
        top = 0
        for l, k in enumerate(self.K):
            if step % k == 0:
                top = l
        return top

    def _regroup(self, pos, counts, top):
        cfg = self.config
        noise = self.rng.standard_normal((pos.shape[0] - counts[0], 3))
        out, new_counts, removed, upd = self.kernels.far_field_sync(
            pos, counts, self.sigma[: top + 1], cfg.receiver_radius, cfg.shell_outer,
            self.margin[: top + 1], self.remove_radius or 0.0, noise,
        )
        self.removed += removed
        self.updates += upd
        edges = np.concatenate(([0], np.cumsum(new_counts)))
        for l in range(top + 1):
            self.levels[l] = out[edges[l]:edges[l + 1]]

    def insert(self, pos, step):
        """Add ligands at ``step``, placed in the levels whose sync falls there."""
        top = self.top_level(step)
        pos = np.asarray(pos, dtype=np.float64).reshape(-1, 3)
        counts = [pos.shape[0]] + [0] * top
        # level-0 rows are classified without being moved
        out, new_counts, removed, _ = self.kernels.far_field_sync(
            pos, counts, self.sigma[: top + 1], self.config.receiver_radius,
            self.config.shell_outer, self.margin[: top + 1], self.remove_radius or 0.0,
            np.empty((0, 3)),
        )
        self.removed += removed
        edges = np.concatenate(([0], np.cumsum(new_counts)))
        for l in range(top + 1):
            if new_counts[l]:
                self.levels[l] = np.vstack([self.levels[l], out[edges[l]:edges[l + 1]]])

    def _sync(self, step):
        """Move the levels due at ``step`` and regroup them."""
        top = self.top_level(step)
        if top == 0:
            return
        merged = np.vstack(self.levels[: top + 1])
        counts = [self.levels[l].shape[0] for l in range(top + 1)]
        self._regroup(merged, counts, top)

    def advance(self, start, stop, out):
        """Step from ``start`` to ``stop``; bound counts go to ``out[: stop - start]``."""
        cfg = self.config
        s = start
        while s < stop:
            e = min(stop, (s // self.K[1] + 1) * self.K[1])
            pos, self.bound, trace, self.rng_state, upd = self.kernels.near_field_block(
                self.levels[0], e - s, self.sigma[0], cfg.receiver_radius, cfg.shell_outer,
                self.bind_coef, self.p_off, cfg.num_receptors, self.bound, self.rng_state,
            )
            out[s - start:e - start] = trace
            self.updates += upd
            self.levels[0] = pos
            self._sync(e)
            s = e

    @property
    def num_free(self):
        return sum(p.shape[0] for p in self.levels)

    def all_positions(self):
        return np.vstack(self.levels)


def _check_budget(params, config, inputs):
    if config.removal_factor is None:
        total = sum(pulse_count(u, params) for u in inputs)
        if total > config.max_particles:
            raise ResourceCapError(
                f"{total} ligands would be alive at once (cap {config.max_particles}); "
                f"n_max={params.n_max:g} over {len(inputs)} symbols with no far-field removal"
            )


def run_replicate(params, inputs, config, seed, multirate=True, backend=None):
    """One stochastic run; returns the bound-fraction trace on the particle grid.

    ``multirate=False`` steps every ligand every step with NumPy; it is the
    slow reference path.
    """
    u = encode_inputs(params, inputs) / params.n_max
    _check_budget(params, config, u)
    dt, S = config.step_size(params)
    n_steps = S * u.size
    R = config.num_receptors
    T = params.symbol_duration_T
    counts = np.zeros(n_steps + 1, dtype=np.int64)
    if multirate:
        eng = _MultiRate(params, config, dt, seed, backend)
        for n, un in enumerate(u):
            k = pulse_count(un, params)
            if k:
                new = np.zeros((k, 3))
                new[:, 0] = params.distance_d
                eng.insert(new, n * S)
                eng.released += k
            eng.advance(n * S, (n + 1) * S, counts[n * S + 1:(n + 1) * S + 1])
            _enforce_caps(eng.updates, eng.num_free, (n + 1) * T, params, config)
    else:
        rng = np.random.default_rng(seed)
        state = ParticleState()
        updates = 0
        for n, un in enumerate(u):
            state = release_pulse(state, un, params, rng)
            for s in range(n * S, (n + 1) * S):
                updates += state.num_free
                state = step_particles(state, params, config, rng, dt)
                counts[s + 1] = state.bound_count
            _enforce_caps(updates, state.num_free, (n + 1) * T, params, config)
    return BoundFractionTrace(dt, counts / R, 0.0)


def _enforce_caps(updates, alive, sim_time, params, config):
    if alive > config.max_particles:
        raise ResourceCapError(
            f"{alive} live ligands exceed the cap of {config.max_particles} "
            f"(n_max={params.n_max:g}, D={params.diffusion_D:g}, d={params.distance_d:g})"
        )
    budget = config.max_particle_steps_per_second * sim_time
    if updates > budget:
        raise ResourceCapError(
            f"{updates} particle updates over {sim_time:g} s exceed the budget of "
            f"{config.max_particle_steps_per_second:g}/s (n_max={params.n_max:g}, "
            f"D={params.diffusion_D:g}, d={params.distance_d:g}, T={params.symbol_duration_T:g})"
        )


def run_stochastic_replicates(params, inputs, config, multirate=True, backend=None):
    """Independent replicate traces, replicate ``r`` seeded with ``rng_seed + r``."""
    return [
        run_replicate(params, inputs, config, config.rng_seed + r, multirate, backend)
        for r in range(config.num_replicates)
    ]


def average_traces(traces):
    first = traces[0]
    return first.with_samples(np.mean([t.samples for t in traces], axis=0))


def run_stochastic(params, inputs, config, multirate=True, backend=None):
    """Replicate-averaged stochastic bound-fraction trace."""
    return average_traces(run_stochastic_replicates(params, inputs, config, multirate, backend))
