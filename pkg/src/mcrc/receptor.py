"""Mean-field ligand-receptor binding driven by the channel concentration."""

import csv
from dataclasses import dataclass

import numpy as np

from . import _backend
from .channel import midpoint_concentration
from .errors import ValidationError

DEFAULT_STEPS_PER_SYMBOL = 200


@dataclass(frozen=True, eq=False)
class BoundFractionTrace:
    """Uniformly sampled bound-receptor fraction ``b(t)``.

    Sample ``k`` sits at ``t0 + k * dt``.
    """

    dt: float
    samples: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValidationError("trace needs a non-empty 1-D sample array")
        if not self.dt > 0:
            raise ValidationError("trace dt must be positive")
        if not (samples.min() >= 0.0 and samples.max() <= 1.0):
            raise ValidationError("bound fractions must lie in [0, 1]")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def duration(self):
        return self.dt * (self.samples.size - 1)

    def with_samples(self, samples):
        return BoundFractionTrace(self.dt, samples, self.t0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "b"])
            for t, b in zip(self.times, self.samples):
                w.writerow([repr(float(t)), repr(float(b))])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t, b = data[:, 0], data[:, 1]
        dt = float(t[1] - t[0]) if t.size > 1 else 1.0
        return cls(dt, b, float(t[0]))


def default_dt(params):
    return params.symbol_duration_T / DEFAULT_STEPS_PER_SYMBOL


def integrate_binding(params, inputs, horizon=None, dt=None, b0=0.0, backend=None):
    """Integrate ``db/dt = k_on c (1 - b) - k_off b`` over a pulse train.

    Each step holds the concentration at its midpoint value and applies the
    exact solution of the resulting linear ODE, so ``b`` never leaves [0, 1].

    Args:
        params: channel parameters.
        inputs: symbol values in [0, 1].
        horizon: simulated time; defaults to ``len(inputs) * T``.
        dt: step size; defaults to ``T / 200``.
        b0: initial bound fraction.
        backend: kernel backend name, ``None`` for the active one.
    """
    if not 0.0 <= b0 <= 1.0:
        raise ValidationError(f"b0 must lie in [0, 1], got {b0!r}")
    if dt is None:
        dt = default_dt(params)
    if horizon is None:
        horizon = len(np.atleast_1d(inputs)) * params.symbol_duration_T
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if not horizon >= dt * (1 - 1e-12):
        raise ValidationError("horizon must be at least one step")
    n_steps = max(1, int(round(horizon / dt)))
    c = midpoint_concentration(params, inputs, dt, n_steps, backend=backend)
    samples = bind_under_concentration(c, params.k_on, params.k_off, dt, b0, backend)
    return BoundFractionTrace(dt, samples, 0.0)


def bind_under_concentration(c, k_on, k_off, dt, b0=0.0, backend=None):
    """Exponential-update integration for a given per-step concentration array."""
    c = np.asarray(c, dtype=np.float64)
    drive = k_on * c
    rate = drive + k_off
    decay = np.exp(-rate * dt)
    with np.errstate(invalid="ignore", divide="ignore"):
        b_inf = np.where(rate > 0, drive / np.where(rate > 0, rate, 1.0), 0.0)
    # zero total rate: b is frozen, so make the step an identity
    decay = np.where(rate > 0, decay, 1.0)
    b = _backend.get(backend).bind_recurrence(decay, b_inf, float(b0))
    return np.clip(b, 0.0, 1.0)


def steady_state(params, concentration):
    """Bound fraction at equilibrium under a constant concentration."""
    drive = params.k_on * concentration
    return drive / (drive + params.k_off)
