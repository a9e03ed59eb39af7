"""Biophysical parameter vector of the channel reservoir."""

import dataclasses
import math
from dataclasses import dataclass

from .errors import ValidationError

MICRON = 1e-6


@dataclass(frozen=True)
class ChannelParams:
    """Control knobs of the channel reservoir, all in SI units.

    Attributes:
        k_on: association rate constant (m^3/s).
        k_off: dissociation rate constant (1/s).
        symbol_duration_T: symbol interval (s).
        distance_d: transmitter-receiver distance (m).
        n_max: molecules released for a full-scale input.
        diffusion_D: diffusion coefficient (m^2/s).
        memory_window_L: number of recent reservoir states fed to the readout.
    """

    k_on: float
    k_off: float
    symbol_duration_T: float
    distance_d: float
    n_max: float
    diffusion_D: float
    memory_window_L: int = 5

    def __post_init__(self):
        self._check(strict=True)

    def _check(self, strict):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"{f.name} must be a number, got {value!r}")
            if not math.isfinite(value):
                raise ValidationError(f"{f.name} must be finite, got {value!r}")
        rates = ("k_on", "k_off", "diffusion_D")
        for name in ("k_on", "k_off", "symbol_duration_T", "distance_d", "diffusion_D"):
            value = getattr(self, name)
            if value < 0 or (value == 0 and (strict or name not in rates)):
                raise ValidationError(f"{name} must be positive, got {value!r}")
        if self.n_max < 1:
            raise ValidationError(f"n_max must be >= 1, got {self.n_max!r}")
        if int(self.memory_window_L) != self.memory_window_L or self.memory_window_L < 1:
            raise ValidationError(
                f"memory_window_L must be a positive integer, got {self.memory_window_L!r}"
            )

    @classmethod
    def limiting_case(cls, **fields):
        """Build parameters that may carry zero rates or zero diffusion.

        Only the particle engine accepts these; they describe frozen or
        absorbing limits that the strict constructor rejects.
        """
        obj = object.__new__(cls)
        defaults = {"memory_window_L": 5}
        defaults.update(fields)
        for f in dataclasses.fields(cls):
            if f.name not in defaults:
                raise ValidationError(f"missing field {f.name}")
            object.__setattr__(obj, f.name, defaults[f.name])
        obj._check(strict=False)
        return obj

    @property
    def K_D(self):
        """Dissociation constant k_off / k_on (m^-3)."""
        return self.k_off / self.k_on

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self, microns=False):
        out = dataclasses.asdict(self)
        if microns:
            out["distance_um"] = out.pop("distance_d") / MICRON
        return out

    @classmethod
    def from_dict(cls, data):
        """Build from a mapping; ``distance_um`` is accepted in place of ``distance_d``."""
        data = dict(data)
        if "distance_um" in data:
            if "distance_d" in data:
                raise ValidationError("give either distance_d or distance_um, not both")
            data["distance_d"] = float(data.pop("distance_um")) * MICRON
        data.pop("K_D", None)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValidationError(f"unknown parameter(s): {sorted(unknown)}")
        if "memory_window_L" in data:
            L = data["memory_window_L"]
            if isinstance(L, float) and L.is_integer():
                data["memory_window_L"] = int(L)
        return cls(**data)


# Optimized sets for the three task regimes. The memory window is not listed
# alongside them; 5 is where the reported top trials cluster.
PUBLISHED_SETS = {
    "forecast_mg": ChannelParams(
        k_on=6.64e-19,
        k_off=4.15,
        symbol_duration_T=1.99,
        distance_d=5.12 * MICRON,
        n_max=19400,
        diffusion_D=1.02e-11,
        memory_window_L=5,
    ),
    "sine_to_square": ChannelParams(
        k_on=1.55e-17,
        k_off=2.78,
        symbol_duration_T=1.22,
        distance_d=4.09 * MICRON,
        n_max=19925,
        diffusion_D=1.82e-10,
        memory_window_L=5,
    ),
    "mg_cubed": ChannelParams(
        k_on=2.47e-18,
        k_off=2.31,
        symbol_duration_T=1.50,
        distance_d=5.35 * MICRON,
        n_max=11030,
        diffusion_D=1.47e-11,
        memory_window_L=5,
    ),
}

REPORTED_NRMSE = {"forecast_mg": 0.097, "sine_to_square": 0.237, "mg_cubed": 0.307}
