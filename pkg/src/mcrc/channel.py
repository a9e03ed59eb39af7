"""Mean-field diffusive channel: impulse response and pulse-train superposition.

The receiver is treated as transparent, so the concentration it senses is the
free-space Green's function of 3D diffusion evaluated at its center.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DomainError, ValidationError
from .params import ChannelParams


def impulse_response_at(params, t):
    """Concentration (1/m^3) per released molecule at time ``t`` after release.

    ``h(t) = (4 pi D t)^(-3/2) exp(-d^2 / (4 D t))``. Accepts scalars or arrays.
    """
    _check_params(params)
    t_arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t_arr)) or np.any(t_arr <= 0):
        raise DomainError("impulse response is defined for t > 0 only")
    out = _green(params.diffusion_D, params.distance_d, t_arr)
    return float(out) if out.ndim == 0 else out


def _green(D, d, t):
    four_dt = 4.0 * D * t
    with np.errstate(under="ignore"):
        return (math.pi * four_dt) ** -1.5 * np.exp(-(d * d) / four_dt)


def peak_time(params):
    """Time at which the impulse response peaks, ``d^2 / (6 D)``."""
    return params.distance_d**2 / (6.0 * params.diffusion_D)


def log_response_ratio(params, t, t_ref):
    """``log(h(t) / h(t_ref))`` evaluated without cancellation.

    Both terms are formed from the offset ``t - t_ref``, so the result keeps
    full relative precision as ``t`` approaches ``t_ref``. This makes the
    function suitable for locating the peak to well below ``sqrt(eps)``.
    """
    _check_params(params)
    t = float(t)
    t_ref = float(t_ref)
    if not (t > 0 and t_ref > 0 and math.isfinite(t) and math.isfinite(t_ref)):
        raise DomainError("impulse response is defined for t > 0 only")
    offset = t - t_ref
    spread = params.distance_d**2 / (4.0 * params.diffusion_D)
    return -1.5 * math.log1p(offset / t_ref) + spread * offset / (t * t_ref)


@dataclass(frozen=True)
class ImpulseResponse:
    """Callable impulse response bound to a parameter set."""

    params: ChannelParams

    def __call__(self, t):
        return impulse_response_at(self.params, t)

    @property
    def t_peak(self):
        return peak_time(self.params)

    @property
    def peak_value(self):
        return impulse_response_at(self.params, self.t_peak)


def _check_params(params):
    if not isinstance(params, ChannelParams):
        raise ValidationError(f"expected ChannelParams, got {type(params).__name__}")
    for name in ("diffusion_D", "distance_d"):
        v = getattr(params, name)
        if not math.isfinite(v) or v <= 0:
            raise ValidationError(f"{name} must be finite and positive")


def encode_inputs(params, inputs):
    """Molecule counts released per symbol, ``u(n) * n_max``."""
    u = np.asarray(inputs, dtype=np.float64).ravel()
    if u.size == 0:
        raise ValidationError("input sequence is empty")
    if not np.all(np.isfinite(u)) or u.min() < 0.0 or u.max() > 1.0:
        raise ValidationError("inputs must lie in [0, 1]")
    return u * params.n_max


def receiver_concentration(params, inputs, t):
    """Receiver concentration at time(s) ``t`` for a pulse train.

    Symbol ``n`` releases ``u(n) * n_max`` molecules at ``n T``; every earlier
    release contributes ``N(n) h(t - n T)``, releases at or after ``t`` do not.
    """
    _check_params(params)
    amounts = encode_inputs(params, inputs)
    t_arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t_arr)) or np.any(t_arr < 0):
        raise DomainError("concentration is defined for t >= 0")
    T = params.symbol_duration_T
    out = np.zeros(t_arr.shape)
    for n, amount in enumerate(amounts):
        lag = t_arr - n * T
        live = lag > 0
        if not np.any(live):
            break
        if amount == 0.0:
            continue
        out[live] += amount * _green(params.diffusion_D, params.distance_d, lag[live])
    return float(out) if out.ndim == 0 else out


def steps_per_symbol(params, dt):
    """Integer number of grid steps per symbol, or ``None`` if ``T/dt`` is not integral."""
    ratio = params.symbol_duration_T / dt
    n = round(ratio)
    if n >= 1 and abs(ratio - n) <= 1e-9 * ratio:
        return int(n)
    return None


def midpoint_concentration(params, inputs, dt, n_steps, backend=None):
    """Concentration at step midpoints ``(k + 1/2) dt`` for ``k < n_steps``.

    When the symbol interval is a whole number of steps all symbols share one
    sampled kernel and the sum runs in the compiled core.
    """
    _check_params(params)
    amounts = encode_inputs(params, inputs)
    S = steps_per_symbol(params, dt)
    if S is None:
        return receiver_concentration(params, inputs, (np.arange(n_steps) + 0.5) * dt)
    kernel = _green(params.diffusion_D, params.distance_d, (np.arange(n_steps) + 0.5) * dt)
    return _backend.get(backend).superpose_aligned(amounts, kernel, S, n_steps)
