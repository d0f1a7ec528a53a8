"""Indoor line-of-sight optical wireless channel and ambient-light background.

The signal path uses the Lambertian DC gain with a concentrator; reflected
signal pulses are ignored because they fall outside the detection gate.  The
ambient background is pluggable: :class:`ReflectionAmbientModel` integrates
direct plus single-bounce light from a Lambertian bulb, and
:class:`TableAmbientModel` injects a digitised PSD-to-noise table.
"""

from __future__ import annotations

import csv
import functools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .config import SystemConfig
from .core import photons_per_gate

logger = logging.getLogger(__name__)

__all__ = [
    "Geometry",
    "AmbientModel",
    "ReflectionAmbientModel",
    "TableAmbientModel",
    "lambert_mode",
    "concentrator_gain",
    "dc_gain",
    "ambient_noise",
]


@dataclass(frozen=True)
class Geometry:
    """Transmitter-telescope distance (m) and irradiance/incidence angles (rad)."""

    distance: float
    phi: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError("distance must be positive")
        for name in ("phi", "psi"):
            if not 0.0 <= getattr(self, name) <= math.pi / 2:
                raise ValueError(f"{name} must lie in [0, pi/2]")

    @classmethod
    def corner_to_ceiling(cls, cfg: SystemConfig) -> "Geometry":
        """Source on a floor corner, telescope at ceiling centre, fully aligned."""
        d = math.sqrt((cfg.room_x / 2) ** 2 + (cfg.room_y / 2) ** 2 + cfg.room_z ** 2)
        return cls(d, 0.0, 0.0)

    @classmethod
    def from_positions(cls, tx, tx_axis, rx, rx_axis) -> "Geometry":
        """Geometry for arbitrary positions and pointing directions (3-vectors)."""
        tx, rx = np.asarray(tx, float), np.asarray(rx, float)
        a_t = np.asarray(tx_axis, float) / np.linalg.norm(tx_axis)
        a_r = np.asarray(rx_axis, float) / np.linalg.norm(rx_axis)
        v = rx - tx
        d = float(np.linalg.norm(v))
        u = v / d
        phi = math.acos(float(np.clip(u @ a_t, -1, 1)))
        psi = math.acos(float(np.clip(-u @ a_r, -1, 1)))
        if phi > math.pi / 2 or psi > math.pi / 2:
            raise ValueError("receiver is behind the transmitter or vice versa")
        return cls(d, phi, psi)


def lambert_mode(theta_half: float) -> float:
    """Lambertian order of a source with half-power semi-angle ``theta_half`` (deg)."""
    if not 0.0 < theta_half < 90.0:
        raise ValueError(f"semi-angle must lie in (0, 90) degrees, got {theta_half!r}")
    return -math.log(2.0) / math.log(math.cos(math.radians(theta_half)))


def concentrator_gain(psi: float, fov: float, n_i: float) -> float:
    """Ideal non-imaging concentrator gain; zero outside the field of view (rad)."""
    if not 0.0 < fov < math.pi / 2:
        raise ValueError("fov must lie in (0, pi/2) rad")
    if psi > fov:
        return 0.0
    return n_i ** 2 / math.sin(fov) ** 2


def dc_gain(geom: Geometry, cfg: SystemConfig) -> float:
    """Line-of-sight DC gain from the QKD source to the telescope."""
    fov = math.radians(cfg.fov)
    if geom.psi > fov:
        return 0.0
    m = lambert_mode(cfg.phi_half_source)
    h = (cfg.telescope_area * (m + 1) / (2 * math.pi * geom.distance ** 2)
         * math.cos(geom.phi) ** m * cfg.filter_transmission
         * concentrator_gain(geom.psi, fov, cfg.concentrator_index) * math.cos(geom.psi))
    if h > 1.0:
        logger.warning("Lambertian DC gain %.4g exceeds 1 at d=%.3g m; clamped", h,
                       geom.distance)
        h = 1.0
    return h


class AmbientModel(Protocol):
    """Maps bulb PSD to background photons per gate.

    ``kind`` tells the pipeline where the value sits: ``"n_b"`` means photons
    per gate collected by the telescope (before coupling, fibre and detector);
    ``"n_total"`` means the total background at the detector, replacing the
    computed sum.
    """

    kind: str

    def __call__(self, psd: float, cfg: SystemConfig) -> float: ...


@functools.lru_cache(maxsize=64)
def _reflection_gain(room, bulb_xy, theta_half, fov_deg, n_i, area, t_s, rho, cell):
    """Optical gain bulb -> telescope: direct path plus one diffuse bounce.

    The bulb sits on the ceiling pointing down; the telescope sits at ceiling
    centre pointing down.  Room surfaces (floor and four walls) are split into
    square cells of side ``cell`` and every cell is treated as a Lambertian
    reflector of reflectivity ``rho``.
    """
    X, Y, Z = room
    m = lambert_mode(theta_half)
    fov = math.radians(fov_deg)
    g = n_i ** 2 / math.sin(fov) ** 2
    bulb = np.array([bulb_xy[0], bulb_xy[1], Z])
    rx = np.array([X / 2, Y / 2, Z])
    down = np.array([0.0, 0.0, -1.0])

    def los(src, src_axis, dst):
        # per-point arrays: cos at source, cos at telescope, distance
        v = dst - src
        dist = np.linalg.norm(v, axis=-1)
        u = v / dist[..., None]
        cos_src = u @ src_axis
        cos_rx = -(u @ down)
        return cos_src, cos_rx, dist

    total = 0.0
    v = rx - bulb
    dist = float(np.linalg.norm(v))
    if dist > 0:
        cos_src = float(v @ down) / dist
        cos_rx = float(-v @ down) / dist
        if cos_src > 0 and cos_rx >= math.cos(fov):
            total += (area * (m + 1) / (2 * math.pi * dist ** 2) * cos_src ** m
                      * t_s * g * cos_rx)

    def grid(n_a, n_b):
        a = (np.arange(n_a) + 0.5) / n_a
        b = (np.arange(n_b) + 0.5) / n_b
        return np.meshgrid(a, b, indexing="ij")

    surfaces = []
    nx, ny, nz = (max(1, round(s / cell)) for s in (X, Y, Z))
    a, b = grid(nx, ny)
    surfaces.append((np.stack([a * X, b * Y, np.zeros_like(a)], -1),
                     np.array([0.0, 0.0, 1.0]), (X / nx) * (Y / ny)))
    a, b = grid(nx, nz)
    for y0, normal_y in ((0.0, 1.0), (Y, -1.0)):
        surfaces.append((np.stack([a * X, np.full_like(a, y0), b * Z], -1),
                         np.array([0.0, normal_y, 0.0]), (X / nx) * (Z / nz)))
    a, b = grid(ny, nz)
    for x0, normal_x in ((0.0, 1.0), (X, -1.0)):
        surfaces.append((np.stack([np.full_like(a, x0), a * Y, b * Z], -1),
                         np.array([normal_x, 0.0, 0.0]), (Y / ny) * (Z / nz)))

    for pts, normal, d_area in surfaces:
        pts = pts.reshape(-1, 3)
        # bulb -> cell
        w = pts - bulb
        d1 = np.linalg.norm(w, axis=1)
        u1 = w / d1[:, None]
        cos_phi1 = u1 @ down
        cos_psi1 = -(u1 @ normal)
        # cell -> telescope
        cos_phi2, cos_psi2, d2 = los(pts, normal, rx)
        ok = (cos_phi1 > 0) & (cos_psi1 > 0) & (cos_phi2 > 0) & (cos_psi2 >= math.cos(fov))
        if not ok.any():
            continue
        contrib = ((m + 1) / (2 * math.pi * d1 ** 2) * cos_phi1 ** m * cos_psi1
                   * rho * d_area / math.pi
                   * cos_phi2 * area * t_s * g * cos_psi2 / d2 ** 2)
        total += float(np.sum(np.where(ok, contrib, 0.0)))
    return total


@dataclass(frozen=True)
class ReflectionAmbientModel:
    """Direct plus single-bounce ambient light from a ceiling bulb.

    The received in-band power is ``psd * bandwidth * gain`` where ``gain`` is
    the direct Lambertian gain plus the one-bounce integral over floor and
    walls.  With the bulb on the ceiling and the telescope looking down, only
    the floor patch inside the field of view contributes.  ``scale`` rescales
    the result; the absolute level is not calibrated against measurements.
    """

    bulb_xy: tuple[float, float] | None = None   # None: ceiling centre
    cell_m: float = 0.01
    scale: float = 1.0
    kind: str = "n_b"

    def optical_gain(self, cfg: SystemConfig) -> float:
        bulb = self.bulb_xy if self.bulb_xy is not None else (cfg.room_x / 2, cfg.room_y / 2)
        return _reflection_gain((cfg.room_x, cfg.room_y, cfg.room_z), tuple(bulb),
                                cfg.theta_half_bulb, cfg.fov, cfg.concentrator_index,
                                cfg.telescope_area, cfg.filter_transmission,
                                cfg.wall_reflectivity, self.cell_m)

    def __call__(self, psd: float, cfg: SystemConfig) -> float:
        if psd <= 0:
            return 0.0
        power = psd * cfg.receiver_bandwidth_nm * self.optical_gain(cfg) * self.scale
        return photons_per_gate(power, cfg.quantum_nm_1, cfg.gate_duration)


@dataclass(frozen=True)
class TableAmbientModel:
    """Ambient noise looked up from a PSD table.

    Interpolation is log-log between rows; outside the table the value is
    scaled proportionally to PSD from the nearest row.  ``kind`` is
    ``"n_total"`` for tables of total detector background (as read off a
    key-rate-versus-PSD plot) or ``"n_b"`` for telescope-side photons.
    """

    psd: tuple[float, ...]
    values: tuple[float, ...]
    kind: str = "n_total"

    def __post_init__(self):
        if len(self.psd) != len(self.values) or not self.psd:
            raise ValueError("ambient table needs matching, non-empty columns")
        if any(p <= 0 for p in self.psd) or any(v < 0 for v in self.values):
            raise ValueError("ambient table needs positive PSD and non-negative values")
        if any(b <= a for a, b in zip(self.psd, self.psd[1:])):
            raise ValueError("ambient table PSD column must increase strictly")
        if any(b < a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("ambient table values must be non-decreasing in PSD")
        if self.kind not in ("n_total", "n_b"):
            raise ValueError(f"unknown ambient table kind {self.kind!r}")

    @classmethod
    def from_csv(cls, path: str | Path) -> "TableAmbientModel":
        """Read ``psd_w_per_nm,n_total_per_gate`` (or ``...,n_b_per_gate``) CSV."""
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        header = [h.strip() for h in rows[0]]
        if header[0] != "psd_w_per_nm" or header[1] not in ("n_total_per_gate", "n_b_per_gate"):
            raise ValueError(f"{path}: unexpected ambient table header {header}")
        kind = "n_total" if header[1] == "n_total_per_gate" else "n_b"
        data = sorted((float(r[0]), float(r[1])) for r in rows[1:])
        return cls(tuple(p for p, _ in data), tuple(v for _, v in data), kind)

    def to_csv(self, path: str | Path) -> None:
        col = "n_total_per_gate" if self.kind == "n_total" else "n_b_per_gate"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["psd_w_per_nm", col])
            for p, v in zip(self.psd, self.values):
                w.writerow([f"{p:.9g}", f"{v:.9g}"])

    def __call__(self, psd: float, cfg: SystemConfig | None = None) -> float:
        if psd <= 0:
            return 0.0
        p, v = self.psd, self.values
        if psd <= p[0]:
            return v[0] * psd / p[0]
        if psd >= p[-1]:
            return v[-1] * psd / p[-1]
        i = int(np.searchsorted(p, psd)) - 1
        if v[i] <= 0 or v[i + 1] <= 0:
            t = (psd - p[i]) / (p[i + 1] - p[i])
            return v[i] + t * (v[i + 1] - v[i])
        t = math.log(psd / p[i]) / math.log(p[i + 1] / p[i])
        return math.exp(math.log(v[i]) + t * math.log(v[i + 1] / v[i]))


DEFAULT_AMBIENT = ReflectionAmbientModel()


def ambient_noise(psd: float, cfg: SystemConfig, model: AmbientModel = DEFAULT_AMBIENT) -> float:
    """Ambient photons per gate for bulb PSD ``psd`` (W/nm) under ``model``."""
    if psd < 0:
        raise ValueError("PSD must be non-negative")
    return model(psd, cfg)
