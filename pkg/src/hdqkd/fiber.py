"""DWDM passive optical network: fibre/AWG loss, launch power and Raman noise.

Lengths are in km, wavelengths in nm, powers in W.  Raman scattering of
every classical channel into the bandwidth of quantum channel 1 is summed
over users; user 1's classical signal shares the full span L0 + L1 with the
quantum signal, the other users only share the feeder L0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SystemConfig, WavelengthPlan
from .core import NoiseBudget, ChannelBudget, db_to_linear, dbm_to_watts, photons_per_gate

__all__ = [
    "RamanCrossSectionTable",
    "LaunchPolicy",
    "fiber_transmittance",
    "classical_path_loss_db",
    "launch_power",
    "raman_forward",
    "raman_backward",
    "raman_photons",
    "total_raman",
    "total_noise",
]


@dataclass(frozen=True)
class RamanCrossSectionTable:
    """Raman cross-section versus signed shift ``lambda_q - lambda_d`` (nm).

    Values are per km per nm of receiver bandwidth.  Linear interpolation
    between rows, zero outside the tabulated range.
    """

    shift_nm: tuple[float, ...]
    gamma: tuple[float, ...]

    def __post_init__(self):
        if len(self.shift_nm) != len(self.gamma) or len(self.shift_nm) < 2:
            raise ValueError("Raman table needs at least two matching rows")
        if any(b <= a for a, b in zip(self.shift_nm, self.shift_nm[1:])):
            raise ValueError("Raman table shifts must increase strictly")
        if any(g < 0 for g in self.gamma):
            raise ValueError("Raman cross-section must be non-negative")

    @classmethod
    def flat(cls, magnitude: float, window_nm: float = 40.0) -> "RamanCrossSectionTable":
        """Placeholder profile: constant ``magnitude`` within +-``window_nm`` of the pump."""
        return cls((-window_nm, window_nm), (magnitude, magnitude))

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "RamanCrossSectionTable":
        return cls.flat(cfg.raman_gamma_per_km_nm, cfg.raman_window_nm)

    @classmethod
    def from_csv(cls, path: str | Path) -> "RamanCrossSectionTable":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        header = [h.strip() for h in rows[0]]
        if header[:2] != ["delta_lambda_nm", "gamma_per_km_nm"]:
            raise ValueError(f"{path}: unexpected Raman table header {header}")
        data = sorted((float(r[0]), float(r[1])) for r in rows[1:])
        return cls(tuple(s for s, _ in data), tuple(g for _, g in data))

    def scaled(self, factor: float) -> "RamanCrossSectionTable":
        return RamanCrossSectionTable(self.shift_nm, tuple(g * factor for g in self.gamma))

    def __call__(self, lambda_d: float, lambda_q: float) -> float:
        shift = lambda_q - lambda_d
        if shift < self.shift_nm[0] or shift > self.shift_nm[-1]:
            return 0.0
        return float(np.interp(shift, self.shift_nm, self.gamma))


@dataclass(frozen=True)
class LaunchPolicy:
    """Classical launch power: a fixed level, or just enough to meet receiver sensitivity."""

    mode: str = "ber-driven"
    fixed_dbm: float = 0.0
    sensitivity_dbm: float = -38.5

    def __post_init__(self):
        if self.mode not in ("ber-driven", "fixed"):
            raise ValueError(f"unknown launch mode {self.mode!r}")

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "LaunchPolicy":
        return cls(cfg.launch_mode, cfg.launch_fixed_dbm, cfg.receiver_sensitivity_dbm)


def fiber_transmittance(l0_km: float, l1_km: float, cfg: SystemConfig) -> float:
    """Fibre plus two AWG passes between the collection telescope and Bob."""
    if l0_km < 0 or l1_km < 0:
        raise ValueError("fibre lengths must be non-negative")
    return db_to_linear(cfg.alpha_db_per_km * (l0_km + l1_km) + 2 * cfg.awg_loss_db)


def classical_path_loss_db(l_user_km: float, l0_km: float, cfg: SystemConfig) -> float:
    return cfg.alpha_db_per_km * (l_user_km + l0_km) + 2 * cfg.awg_loss_db


def launch_power(policy: LaunchPolicy, path_loss_db: float) -> float:
    """Launch power in W for a classical channel with the given path loss."""
    if path_loss_db < 0:
        raise ValueError("path loss must be non-negative")
    if policy.mode == "fixed":
        return dbm_to_watts(policy.fixed_dbm)
    return dbm_to_watts(policy.sensitivity_dbm + path_loss_db)


def raman_forward(power_w: float, length_km: float, lambda_d: float, lambda_q: float,
                  cfg: SystemConfig, table: RamanCrossSectionTable) -> float:
    """Co-propagating Raman power (W) reaching the end of a fibre of ``length_km``."""
    a = cfg.alpha_raman_per_km
    return (power_w * math.exp(-a * length_km) * length_km
            * table(lambda_d, lambda_q) * cfg.receiver_bandwidth_nm)


def raman_backward(power_w: float, length_km: float, lambda_d: float, lambda_q: float,
                   cfg: SystemConfig, table: RamanCrossSectionTable) -> float:
    """Counter-propagating Raman power (W) returning to the launch end."""
    a = cfg.alpha_raman_per_km
    return (power_w * -math.expm1(-2 * a * length_km) / (2 * a)
            * table(lambda_d, lambda_q) * cfg.receiver_bandwidth_nm)


def raman_photons(power_w: float, lambda_q: float, cfg: SystemConfig) -> float:
    """Detected Raman photons per gate for scattered power ``power_w``."""
    return cfg.detector_efficiency * photons_per_gate(power_w, lambda_q, cfg.gate_duration)


def total_raman(cfg: SystemConfig, plan: WavelengthPlan, policy: LaunchPolicy,
                table: RamanCrossSectionTable) -> tuple[float, float]:
    """Forward and backward Raman power (W) in quantum channel 1 from all users.

    Every user sits ``l1_km`` from the remote AWG.  Interfering users' forward
    contributions carry an extra ``exp(-alpha_r * L_u)`` on their launch power
    while backward contributions do not; both are then attenuated by two AWG
    passes.
    """
    l0, lu = cfg.l0_km, cfg.l1_km
    lq = plan.quantum_nm[0]
    awg = db_to_linear(2 * cfg.awg_loss_db)
    fwd = bwd = 0.0
    for u, ld in enumerate(plan.classical_nm):
        power = launch_power(policy, classical_path_loss_db(lu, l0, cfg))
        if u == 0:
            fwd += raman_forward(power, l0 + lu, ld, lq, cfg, table)
            bwd += raman_backward(power, l0 + lu, ld, lq, cfg, table)
        else:
            fwd += raman_forward(power * math.exp(-cfg.alpha_raman_per_km * lu), l0,
                                 ld, lq, cfg, table)
            bwd += raman_backward(power, l0, ld, lq, cfg, table)
    return fwd * awg, bwd * awg


def total_noise(cfg: SystemConfig, n_b: float, budget: ChannelBudget,
                raman_w: tuple[float, float] = (0.0, 0.0)) -> NoiseBudget:
    """Background photons per gate at Bob's detectors, split by source."""
    if n_b < 0 or min(raman_w) < 0:
        raise ValueError("noise inputs must be non-negative")
    lq = cfg.quantum_nm_1
    return NoiseBudget(
        raman_forward=raman_photons(raman_w[0], lq, cfg),
        raman_backward=raman_photons(raman_w[1], lq, cfg),
        ambient=cfg.detector_efficiency * n_b * budget.eta_fib * budget.eta_coup,
        dark=cfg.dark_counts_per_gate,
    )
