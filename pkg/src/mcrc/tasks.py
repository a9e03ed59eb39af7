"""Benchmark task generators and the NRMSE metric."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import UndefinedMetricError, ValidationError

TASK_KINDS = ("forecast_mg", "sine_to_square", "mg_cubed")
DEFAULT_HORIZON = {"forecast_mg": 6, "sine_to_square": 0, "mg_cubed": 10}


@dataclass(frozen=True, eq=False)
class TaskSeries:
    """Input sequence in [0, 1] paired with task targets in native scale."""

    inputs: np.ndarray
    targets: np.ndarray
    task_kind: str
    horizon_P: int = 0

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if u.shape != y.shape or u.ndim != 1:
            raise ValidationError("inputs and targets must be 1-D and the same length")
        if u.size and (u.min() < 0.0 or u.max() > 1.0):
            raise ValidationError("task inputs must lie in [0, 1]")
        if self.task_kind not in TASK_KINDS:
            raise ValidationError(f"unknown task kind {self.task_kind!r}")
        if self.horizon_P < 0:
            raise ValidationError("horizon_P must be non-negative")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return self.inputs.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "u", "y"])
            for n, (u, y) in enumerate(zip(self.inputs, self.targets)):
                w.writerow([n, repr(float(u)), repr(float(y))])

    @classmethod
    def from_csv(cls, path, task_kind, horizon_P=0):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1], data[:, 2], task_kind, horizon_P)


def gen_mackey_glass(
    length,
    dt_mg=0.1,
    seed=0,
    *,
    tau=17.0,
    beta=0.2,
    gamma=0.1,
    power=10.0,
    history=1.2,
    perturbation=1e-3,
    transient=1000.0,
    sample_every=1.0,
    backend=None,
):
    """Sample a Mackey-Glass series after discarding a transient.

    The history on ``[-tau, 0]`` is ``history`` plus uniform noise of the given
    amplitude drawn from ``seed``. One sample is emitted every
    ``sample_every`` time units, starting at ``t = transient``.
    """
    if length < 1:
        raise ValidationError("length must be >= 1")
    if not dt_mg > 0:
        raise ValidationError("dt_mg must be positive")
    tau_steps = _whole_steps(tau, dt_mg, "tau")
    stride = _whole_steps(sample_every, dt_mg, "sample_every")
    skip = _whole_steps(transient, dt_mg, "transient") if transient else 0
    rng = np.random.default_rng(seed)
    hist = np.full(tau_steps + 1, float(history))
    if perturbation:
        hist = hist + perturbation * rng.uniform(-1.0, 1.0, tau_steps + 1)
    n_steps = skip + stride * (length - 1)
    x = _backend.get(backend).mackey_glass(hist, n_steps, dt_mg, beta, gamma, power, tau_steps)
    return x[skip::stride][:length].copy()


def _whole_steps(span, dt, name):
    ratio = span / dt
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ValidationError(f"{name}={span} is not a whole number of steps of {dt}")
    return int(n)


def minmax_normalize(x, fit_fraction=1.0):
    """Scale to [0, 1] using the min/max of the leading ``fit_fraction`` of ``x``.

    Values outside the fitted range are clipped. A constant fit window maps
    everything to 0.
    """
    x = np.asarray(x, dtype=np.float64)
    if not 0.0 < fit_fraction <= 1.0:
        raise ValidationError("fit_fraction must lie in (0, 1]")
    head = x[: max(1, int(math.ceil(fit_fraction * x.size)))]
    lo, hi = float(head.min()), float(head.max())
    if hi <= lo:
        return np.zeros_like(x)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


def make_forecast_task(raw, P, fit_fraction=1.0):
    """Predict ``raw[n + P]`` from inputs ``raw[n]`` (normalized)."""
    raw = np.asarray(raw, dtype=np.float64)
    if int(P) != P or P < 1:
        raise ValidationError("forecast horizon P must be a positive integer")
    P = int(P)
    if P >= raw.size:
        raise ValidationError(f"horizon P={P} leaves no samples in a series of {raw.size}")
    u = minmax_normalize(raw[: raw.size - P], fit_fraction)
    return TaskSeries(u, raw[P:].copy(), "forecast_mg", P)


def make_mg_cubed_task(raw, P, fit_fraction=1.0):
    """As :func:`make_forecast_task` but the target is cubed."""
    task = make_forecast_task(raw, P, fit_fraction)
    return TaskSeries(task.inputs, task.targets**3, "mg_cubed", task.horizon_P)


def make_sine_to_square(num_symbols, period=20.0):
    """Sine input and a square-wave target of the same frequency.

    ``u(n) = 0.5 + 0.5 sin(2 pi n / period)``, ``y(n) = sign(sin(...))`` with
    zero crossings mapped to +1.
    """
    if period < 4:
        raise ValidationError("period must be >= 4 symbols")
    if num_symbols < period:
        raise ValidationError("need at least one full period")
    n = np.arange(int(num_symbols))
    phase = np.mod(n, period) / period
    s = np.sin(2.0 * np.pi * phase)
    # exact zero crossings come out as +/-1e-16 in floating point
    crossing = np.isclose(phase, 0.0, atol=1e-12) | np.isclose(phase, 0.5, atol=1e-12)
    s = np.where(crossing, 0.0, s)
    u = np.clip(0.5 + 0.5 * s, 0.0, 1.0)
    y = np.where(s >= 0.0, 1.0, -1.0)
    return TaskSeries(u, y, "sine_to_square", 0)


def make_task(kind, num_symbols, *, P=None, seed=0, period=20.0, fit_fraction=1.0):
    """Build a task of ``num_symbols`` aligned input/target pairs."""
    if kind not in TASK_KINDS:
        raise ValidationError(f"unknown task kind {kind!r}")
    if kind == "sine_to_square":
        return make_sine_to_square(num_symbols, period)
    P = DEFAULT_HORIZON[kind] if P is None else P
    raw = gen_mackey_glass(num_symbols + P, seed=seed)
    build = make_forecast_task if kind == "forecast_mg" else make_mg_cubed_task
    return build(raw, P, fit_fraction)


def nrmse(y_true, y_pred):
    """Root of summed squared error over summed squared deviation of ``y_true``."""
    y = np.asarray(y_true, dtype=np.float64).ravel()
    yhat = np.asarray(y_pred, dtype=np.float64).ravel()
    if y.size == 0 or y.size != yhat.size:
        raise ValidationError("y_true and y_pred need equal, nonzero lengths")
    if np.ptp(y) == 0.0:
        raise UndefinedMetricError("NRMSE is undefined for a constant target")
    denom = float(np.sum((y - y.mean()) ** 2))
    return math.sqrt(float(np.sum((y - yhat) ** 2)) / denom)
