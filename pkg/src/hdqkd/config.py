"""System configuration: nominal parameter set, validation and the config file format.

Fields are stored in the units people quote them in (degrees, nm, km, dB,
counts per ns); the physics functions convert at their boundary.  The file
format is plain ``key = value`` text grouped into sections, read and written
with :mod:`configparser`.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "ConfigError",
    "SystemConfig",
    "WavelengthPlan",
    "DEFAULT_CONFIG",
    "violations",
    "validate",
    "load_config",
    "dumps_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Raised by :func:`validate`; ``.violations`` lists every failed check."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations))


@dataclass(frozen=True)
class WavelengthPlan:
    quantum_nm: tuple[float, ...]
    classical_nm: tuple[float, ...]
    spacing_nm: float

    @classmethod
    def grid(cls, quantum_1_nm: float, classical_1_nm: float, spacing_nm: float,
             num_users: int) -> "WavelengthPlan":
        """Both channel sets ascend from user 1 on a common spacing."""
        q = tuple(quantum_1_nm + spacing_nm * u for u in range(num_users))
        d = tuple(classical_1_nm + spacing_nm * u for u in range(num_users))
        return cls(q, d, spacing_nm)

    def problems(self) -> list[str]:
        out = []
        if len(self.quantum_nm) != len(self.classical_nm):
            out.append("wavelength plan: quantum and classical channel counts differ")
        if any(not w > 0 for w in self.quantum_nm + self.classical_nm):
            out.append("wavelength plan: wavelengths must be positive")
        if set(self.quantum_nm) & set(self.classical_nm):
            out.append("wavelength plan: quantum and classical sets overlap")
        pairs = list(zip(self.quantum_nm, self.classical_nm))
        if len(set(pairs)) != len(pairs):
            out.append("wavelength plan: per-user pairs are not unique")
        return out


# (section, field names) in file order
_SECTIONS = {
    "room": ("room_x", "room_y", "room_z", "theta_half_bulb", "psd_w_per_nm",
             "wall_reflectivity"),
    "transmitter": ("phi_half_source", "dimension", "intensities", "intensity_probs",
                    "p_time_basis", "clock_rate_hz"),
    "receiver": ("fov", "concentrator_index", "telescope_area", "filter_transmission",
                 "coupling_loss_db", "gate_duration", "detector_efficiency",
                 "dark_count_rate", "misalignment", "interferometer_transmittance",
                 "receiver_bandwidth_nm"),
    "network": ("l0_km", "l1_km", "alpha_db_per_km", "alpha_raman_per_km", "awg_loss_db",
                "num_users", "quantum_nm_1", "classical_nm_1", "channel_spacing_nm",
                "launch_mode", "receiver_sensitivity_dbm", "launch_fixed_dbm",
                "raman_gamma_per_km_nm", "raman_window_nm"),
    "security": ("block_size", "eps_sec", "eps_cor", "f_ec", "deviation_log",
                 "frame_policy"),
}

FRAME_POLICIES = ("per-state-clock", "clock-per-bin")
LAUNCH_MODES = ("ber-driven", "fixed")
DEVIATION_LOGS = ("ln", "log2", "log10")


@dataclass(frozen=True)
class SystemConfig:
    """Complete parameter set of one scenario.

    Defaults reproduce the nominal table of the model (4x4x3 m room, 70 deg
    bulb, 1 deg source, 6 deg FOV, 100 ps gates, decoy set 0.54/0.1/0.0002
    with probabilities 0.5/0.06/0.44, p_T = 0.9, 10 dB coupling, 0.2 dB/km,
    0.046/km Raman attenuation, 2 dB per AWG, f = 1.16, 32 users, 1e-7/ns
    dark counts, e_d = 0.033, eta_d = 0.3).  Values absent from that table
    carry documented assumptions (telescope area, concentrator index,
    security parameters, receiver bandwidth, Raman cross-section).
    """

    # room and ambient light
    room_x: float = 4.0                     # m
    room_y: float = 4.0                     # m
    room_z: float = 3.0                     # m
    theta_half_bulb: float = 70.0           # deg
    psd_w_per_nm: float = 1e-5              # W/nm
    wall_reflectivity: float = 0.8
    # transmitter
    phi_half_source: float = 1.0            # deg
    dimension: int = 4
    intensities: tuple[float, float, float] = (0.54, 0.1, 0.0002)
    intensity_probs: tuple[float, float, float] = (0.5, 0.06, 0.44)
    p_time_basis: float = 0.9
    clock_rate_hz: float = 2.5e9
    # receiver
    fov: float = 6.0                        # deg
    concentrator_index: float = 1.5
    telescope_area: float = 1e-4            # m^2 (1 cm^2)
    filter_transmission: float = 1.0
    coupling_loss_db: float = 10.0
    gate_duration: float = 100e-12          # s
    detector_efficiency: float = 0.3
    dark_count_rate: float = 1e-7           # per ns
    misalignment: float = 0.033
    interferometer_transmittance: float = 1.0
    receiver_bandwidth_nm: float = 0.1
    # access network
    l0_km: float = 5.0
    l1_km: float = 0.5
    alpha_db_per_km: float = 0.2
    alpha_raman_per_km: float = 0.046
    awg_loss_db: float = 2.0
    num_users: int = 32
    quantum_nm_1: float = 1555.62
    classical_nm_1: float = 1585.2
    channel_spacing_nm: float = 0.8
    launch_mode: str = "ber-driven"
    receiver_sensitivity_dbm: float = -38.5
    launch_fixed_dbm: float = 0.0
    raman_gamma_per_km_nm: float = 1e-11    # placeholder flat profile
    raman_window_nm: float = 40.0
    # finite-key analysis
    block_size: float = 1e10
    eps_sec: float = 1e-10
    eps_cor: float = 1e-10
    f_ec: float = 1.16
    deviation_log: str = "ln"
    frame_policy: str = "per-state-clock"

    @property
    def p_phase_basis(self) -> float:
        return 1.0 - self.p_time_basis

    @property
    def wavelength_plan(self) -> WavelengthPlan:
        return WavelengthPlan.grid(self.quantum_nm_1, self.classical_nm_1,
                                   self.channel_spacing_nm, self.num_users)

    @property
    def dark_counts_per_gate(self) -> float:
        return self.dark_count_rate * self.gate_duration * 1e9

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


DEFAULT_CONFIG = SystemConfig()


def _in(lo, hi, v, lo_open=False, hi_open=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or math.isnan(v):
        return False
    ok_lo = v > lo if lo_open else v >= lo
    ok_hi = v < hi if hi_open else v <= hi
    return ok_lo and ok_hi


def violations(cfg: SystemConfig) -> list[str]:
    """Every invariant the configuration breaks, as human-readable messages."""
    out: list[str] = []

    def need(cond, msg):
        if not cond:
            out.append(msg)

    for name in ("room_x", "room_y", "room_z", "telescope_area", "gate_duration",
                 "clock_rate_hz", "receiver_bandwidth_nm", "concentrator_index",
                 "channel_spacing_nm"):
        need(_in(0, math.inf, getattr(cfg, name), lo_open=True), f"{name} must be positive")
    for name in ("theta_half_bulb", "phi_half_source", "fov"):
        need(_in(0, 90, getattr(cfg, name), True, True), f"{name} must lie in (0, 90) degrees")
    for name in ("filter_transmission", "detector_efficiency", "misalignment",
                 "wall_reflectivity"):
        need(_in(0, 1, getattr(cfg, name)), f"{name} must lie in [0, 1]")
    need(_in(0, 1, cfg.interferometer_transmittance, lo_open=True),
         "interferometer_transmittance must lie in (0, 1]")
    for name in ("coupling_loss_db", "alpha_db_per_km", "awg_loss_db", "l0_km", "l1_km",
                 "dark_count_rate", "psd_w_per_nm", "raman_gamma_per_km_nm",
                 "raman_window_nm"):
        need(_in(0, math.inf, getattr(cfg, name)), f"{name} must be non-negative")
    need(_in(0, math.inf, cfg.alpha_raman_per_km, lo_open=True),
         "alpha_raman_per_km must be positive")
    need(_in(1, math.inf, cfg.f_ec), "f_ec must be >= 1")

    mu = cfg.intensities
    p = cfg.intensity_probs
    if len(mu) != 3 or len(p) != 3:
        out.append("exactly three intensities and three probabilities are required")
    else:
        if not (mu[0] > mu[1] + mu[2] and mu[1] > mu[2] >= 0):
            out.append("decoy ordering violated: need mu1 > mu2 + mu3 and mu2 > mu3 >= 0")
        if any(not _in(0, 1, x) for x in p):
            out.append("intensity probabilities must lie in [0, 1]")
        if abs(sum(p) - 1.0) > 1e-12:
            out.append(f"probabilities sum != 1 (sum = {sum(p)!r})")
    need(_in(0, 1, cfg.p_time_basis, True, True), "p_time_basis must lie in (0, 1)")

    d = cfg.dimension
    need(isinstance(d, int) and d >= 2 and d & (d - 1) == 0,
         "dimension must be a power of two >= 2")
    need(isinstance(cfg.num_users, int) and cfg.num_users >= 1, "num_users must be >= 1")
    need(_in(1, math.inf, cfg.block_size), "block_size must be >= 1")
    need(_in(0, 1, cfg.eps_sec, True, True), "eps_sec must lie in (0, 1)")
    need(_in(0, 1, cfg.eps_cor, True, True), "eps_cor must lie in (0, 1)")
    need(cfg.launch_mode in LAUNCH_MODES, f"launch_mode must be one of {LAUNCH_MODES}")
    need(cfg.frame_policy in FRAME_POLICIES, f"frame_policy must be one of {FRAME_POLICIES}")
    need(cfg.deviation_log in DEVIATION_LOGS, f"deviation_log must be one of {DEVIATION_LOGS}")
    if not out:
        out.extend(cfg.wavelength_plan.problems())
    return out


def validate(cfg: SystemConfig) -> SystemConfig:
    """Return ``cfg`` unchanged if it is valid, otherwise raise :class:`ConfigError`."""
    problems = violations(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


# -- file format ------------------------------------------------------------

_FIELD_TYPES = {f.name: type(f.default) for f in dataclasses.fields(SystemConfig)}


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    if kind is tuple:
        return tuple(float(x) for x in raw.split(","))
    if kind is int:
        as_float = float(raw)
        if as_float != int(as_float):
            raise ValueError(f"{name} must be an integer, got {raw!r}")
        return int(as_float)
    if kind is float:
        return float(raw)
    return raw


def dumps_config(cfg: SystemConfig = DEFAULT_CONFIG) -> str:
    parser = configparser.ConfigParser()
    for section, names in _SECTIONS.items():
        parser[section] = {n: _format(getattr(cfg, n)) for n in names}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def parse_config(text: str, base: SystemConfig = DEFAULT_CONFIG) -> SystemConfig:
    """Parse config text on top of ``base``; unknown keys are an error."""
    parser = configparser.ConfigParser()
    parser.read_string(text)
    changes = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError([f"unknown section [{section}]"])
        for key, raw in parser[section].items():
            if key not in _SECTIONS[section]:
                raise ConfigError([f"unknown key {key!r} in [{section}]"])
            try:
                changes[key] = _convert(key, raw)
            except ValueError as exc:
                raise ConfigError([f"{key}: {exc}"]) from exc
    return dataclasses.replace(base, **changes)


def load_config(path: str | Path, base: SystemConfig = DEFAULT_CONFIG) -> SystemConfig:
    return parse_config(Path(path).read_text(), base)
