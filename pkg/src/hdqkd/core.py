"""Physical constants, unit helpers and the budget records shared by all modules."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

__all__ = [
    "PLANCK",
    "SPEED_OF_LIGHT",
    "ChannelBudget",
    "NoiseBudget",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watts",
    "watts_to_dbm",
    "photons_per_gate",
]

NM = 1e-9


def db_to_linear(loss_db: float) -> float:
    """Transmittance of a loss given in dB: 10 dB -> 0.1."""
    return 10.0 ** (-loss_db / 10.0)


def linear_to_db(transmittance: float) -> float:
    """Loss in dB of a linear transmittance; inverse of :func:`db_to_linear`."""
    if not transmittance > 0:
        raise ValueError(f"linear value must be positive, got {transmittance!r}")
    return -10.0 * math.log10(transmittance)


def dbm_to_watts(p_dbm: float) -> float:
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watts_to_dbm(p_w: float) -> float:
    if not p_w > 0:
        raise ValueError(f"power must be positive, got {p_w!r}")
    return 10.0 * math.log10(p_w / 1e-3)


def photons_per_gate(power_w: float, wavelength_nm: float, gate_s: float) -> float:
    """Mean photon number carried by ``power_w`` during one detector gate."""
    return power_w * wavelength_nm * NM * gate_s / (PLANCK * SPEED_OF_LIGHT)


@dataclass(frozen=True)
class ChannelBudget:
    """End-to-end transmittance split into its multiplicative stages."""

    h_dc: float
    eta_coup: float
    eta_fib: float
    eta_det: float

    def __post_init__(self):
        for name in ("h_dc", "eta_coup", "eta_fib", "eta_det"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} is not a transmittance in [0, 1]")

    @property
    def eta_total(self) -> float:
        return self.h_dc * self.eta_coup * self.eta_fib * self.eta_det

    @property
    def loss_db(self) -> float:
        """Total loss in dB (infinite when the wireless link is blocked)."""
        eta = self.eta_total
        return linear_to_db(eta) if eta > 0 else math.inf

    def stage_losses_db(self) -> dict[str, float]:
        out = {}
        for name in ("h_dc", "eta_coup", "eta_fib", "eta_det"):
            v = getattr(self, name)
            out[name] = linear_to_db(v) if v > 0 else math.inf
        return out


@dataclass(frozen=True)
class NoiseBudget:
    """Background photons per gate at the receiver, by source."""

    raman_forward: float
    raman_backward: float
    ambient: float
    dark: float

    def __post_init__(self):
        for name in ("raman_forward", "raman_backward", "ambient", "dark"):
            v = getattr(self, name)
            if not v >= 0.0:
                raise ValueError(f"noise component {name}={v!r} is negative")

    @property
    def n_total(self) -> float:
        return self.raman_forward + self.raman_backward + self.ambient + self.dark
