"""End-to-end evaluation: budgets -> expected decoy statistics -> key rate.

Counts are expectation values of a no-eavesdropper run, so curves are
deterministic.  :func:`sample_counts` draws Poisson counts around them for
statistical experiments.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .config import SystemConfig, validate
from .core import ChannelBudget, NoiseBudget, db_to_linear
from .fiber import (LaunchPolicy, RamanCrossSectionTable, fiber_transmittance,
                    total_noise, total_raman)
from .finite_key import DecoyStatistics, KeyRateResult, key_length
from .owc import (DEFAULT_AMBIENT, AmbientModel, Geometry, ReflectionAmbientModel,
                  TableAmbientModel, dc_gain)

logger = logging.getLogger(__name__)

__all__ = [
    "ScenarioPoint",
    "Evaluation",
    "expected_counts",
    "sample_counts",
    "channel_budget",
    "noise_budget",
    "evaluate",
    "sweep",
    "calibrate_ambient_scale",
    "calibrated_ambient",
    "cutoff_length",
    "ambient_table",
]


@dataclass(frozen=True)
class ScenarioPoint:
    """A fully resolved configuration plus the ambient model and Raman table to use."""

    config: SystemConfig
    ambient: AmbientModel = DEFAULT_AMBIENT
    raman: RamanCrossSectionTable | None = None   # None: flat profile from config
    geometry: Geometry | None = None              # None: corner-to-ceiling, aligned

    def __post_init__(self):
        validate(self.config)

    @property
    def l0_km(self) -> float:
        return self.config.l0_km

    @property
    def psd_w_per_nm(self) -> float:
        return self.config.psd_w_per_nm

    @property
    def dimension(self) -> int:
        return self.config.dimension

    @property
    def block_size(self) -> float:
        return self.config.block_size

    def with_config(self, **changes) -> "ScenarioPoint":
        return replace(self, config=self.config.replace(**changes))


@dataclass(frozen=True)
class Evaluation:
    point: ScenarioPoint
    channel: ChannelBudget
    noise: NoiseBudget
    stats: DecoyStatistics
    result: KeyRateResult
    error: str | None = None

    @property
    def rate_bps(self) -> float:
        return self.result.rate_bps


def expected_counts(eta: float, n_noise: float, cfg: SystemConfig) -> DecoyStatistics:
    """Expected detections and errors per basis and intensity for a block."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if n_noise < 0:
        raise ValueError("background noise must be non-negative")
    d = cfg.dimension
    frac = (d - 1) / d
    pt2 = cfg.p_time_basis ** 2 * cfg.block_size
    pf2 = cfg.p_phase_basis ** 2 * cfg.block_size
    ed = cfg.misalignment
    eta_i = cfg.interferometer_transmittance
    n_T, n_F, m_T, m_F = [], [], [], []
    for mu, p in zip(cfg.intensities, cfg.intensity_probs):
        click_t = -math.expm1(-eta * mu)
        click_f = -math.expm1(-eta * eta_i * mu)
        n_T.append(p * pt2 * (click_t + n_noise))
        n_F.append(p * pf2 * (click_f + frac * n_noise))
        m_T.append(p * pt2 * (ed * click_t + frac * n_noise))
        m_F.append(p * pf2 * (ed * click_f + frac * n_noise))
    return DecoyStatistics(tuple(n_T), tuple(n_F), tuple(m_T), tuple(m_F))


def sample_counts(stats: DecoyStatistics, rng: np.random.Generator) -> DecoyStatistics:
    """Poisson-sampled counts around ``stats``; errors are thinned from detections."""
    out = {}
    for b in ("T", "F"):
        n_exp = np.asarray(getattr(stats, f"n_{b}"))
        m_exp = np.asarray(getattr(stats, f"m_{b}"))
        n = rng.poisson(n_exp)
        frac = np.divide(m_exp, n_exp, out=np.zeros_like(n_exp), where=n_exp > 0)
        m = rng.binomial(n, np.clip(frac, 0, 1))
        out[f"n_{b}"] = tuple(float(x) for x in n)
        out[f"m_{b}"] = tuple(float(x) for x in m)
    return DecoyStatistics(**out)


def channel_budget(point: ScenarioPoint) -> ChannelBudget:
    cfg = point.config
    geom = point.geometry or Geometry.corner_to_ceiling(cfg)
    return ChannelBudget(
        h_dc=dc_gain(geom, cfg),
        eta_coup=db_to_linear(cfg.coupling_loss_db),
        eta_fib=fiber_transmittance(cfg.l0_km, cfg.l1_km, cfg),
        eta_det=cfg.detector_efficiency,
    )


def noise_budget(point: ScenarioPoint, channel: ChannelBudget) -> NoiseBudget:
    cfg = point.config
    table = point.raman or RamanCrossSectionTable.from_config(cfg)
    raman_w = total_raman(cfg, cfg.wavelength_plan, LaunchPolicy.from_config(cfg), table)
    ambient = point.ambient(cfg.psd_w_per_nm, cfg)
    if getattr(point.ambient, "kind", "n_b") == "n_b":
        return total_noise(cfg, ambient, channel, raman_w)
    # the table already holds the total background; ambient is the remainder
    floor = total_noise(cfg, 0.0, channel, raman_w)
    rest = ambient - floor.n_total
    if rest < 0:
        logger.warning("ambient table total %.3g is below Raman + dark %.3g; using the latter",
                       ambient, floor.n_total)
        rest = 0.0
    return replace(floor, ambient=rest)


def evaluate(point: ScenarioPoint) -> Evaluation:
    """Run the full chain for one scenario and keep every intermediate."""
    cfg = point.config
    channel = channel_budget(point)
    noise = noise_budget(point, channel)
    stats = expected_counts(channel.eta_total, noise.n_total, cfg)
    try:
        result = key_length(stats, cfg)
        error = None
    except (ArithmeticError, ValueError) as exc:
        logger.warning("key length failed: %s", exc)
        result = KeyRateResult(0.0, math.nan, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
                               reason=f"error: {exc}")
        error = str(exc)
    return Evaluation(point, channel, noise, stats, result, error)


def _point_for(axis: str, value: float, base: ScenarioPoint) -> ScenarioPoint:
    if axis == "psd":
        return base.with_config(psd_w_per_nm=float(value))
    if axis == "fiber_length":
        # value is the total span L0 + L1
        l0 = float(value) - base.config.l1_km
        if l0 < -1e-12:
            raise ValueError(f"total length {value} km is shorter than the drop fibre")
        return base.with_config(l0_km=max(l0, 0.0))
    raise ValueError(f"unknown sweep axis {axis!r}")


def _safe_evaluate(point: ScenarioPoint) -> Evaluation:
    try:
        return evaluate(point)
    except Exception as exc:  # recorded per row; the sweep carries on
        logger.error("evaluation failed: %s", exc)
        zero = KeyRateResult(0.0, math.nan, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
                             reason=f"error: {exc}")
        return Evaluation(point, ChannelBudget(0, 0, 0, 0), NoiseBudget(0, 0, 0, 0),
                          DecoyStatistics((0,) * 3, (0,) * 3, (0,) * 3, (0,) * 3), zero,
                          str(exc))


def sweep(axis: str, grid: Sequence[float], base: ScenarioPoint,
          workers: int | None = None) -> list[Evaluation]:
    """Evaluate ``base`` along ``axis`` ("psd" or "fiber_length"), in grid order."""
    if len(grid) == 0:
        raise ValueError("sweep grid is empty")
    points = [_point_for(axis, v, base) for v in grid]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_safe_evaluate, points))
    return [_safe_evaluate(p) for p in points]


def cutoff_length(base: ScenarioPoint, lo: float, hi: float, tol: float = 1e-3) -> float:
    """Largest total fibre length in ``[lo, hi]`` with a positive key (bisection).

    Assumes the key rate is non-increasing in length.
    """
    def positive(length):
        return evaluate(_point_for("fiber_length", length, base)).result.key_length_bits > 0

    if not positive(lo):
        return lo
    if positive(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if positive(mid) else (lo, mid)
    return 0.5 * (lo + hi)


def calibrate_ambient_scale(reference: ScenarioPoint, target_bps: float,
                            max_scale: float = 1e4, rtol: float = 1e-6) -> float:
    """Scale of a :class:`ReflectionAmbientModel` that makes ``reference`` hit ``target_bps``.

    The key rate falls as the ambient scale grows, so the scale is bisected in
    log space over ``[1e-12, max_scale]``.  Returns 0.0 when the reference
    already falls short of the target without any ambient light, and raises
    ``ValueError`` when even ``max_scale`` leaves the rate above the target.
    """
    if not isinstance(reference.ambient, ReflectionAmbientModel):
        raise TypeError("calibration needs a ReflectionAmbientModel")

    def rate(scale):
        return evaluate(replace(reference, ambient=replace(reference.ambient, scale=scale))).rate_bps

    if rate(0.0) <= target_bps:
        logger.warning("reference reaches only %.4g bps without ambient light (target %.4g);"
                       " calibrated scale is 0", rate(0.0), target_bps)
        return 0.0
    if rate(max_scale) > target_bps:
        raise ValueError(f"rate stays above {target_bps:.4g} bps up to scale {max_scale:g}")
    a, b = math.log(1e-12), math.log(max_scale)
    if rate(math.exp(a)) <= target_bps:
        return math.exp(a)
    while b - a > rtol:
        mid = 0.5 * (a + b)
        if rate(math.exp(mid)) > target_bps:
            a = mid
        else:
            b = mid
    return math.exp(0.5 * (a + b))


# Reference operating point used to fix the ambient level: d = 4, N = 1e11,
# interferometer transmittance 0.5, L0 = 10 km, PSD 1e-5 W/nm -> about 1.4 Mb/s.
REFERENCE_ANCHOR = {"dimension": 4, "block_size": 1e11, "interferometer_transmittance": 0.5,
                    "l0_km": 10.0, "psd_w_per_nm": 1e-5}
REFERENCE_RATE_BPS = 1.4e6


def calibrated_ambient(cfg: SystemConfig) -> ReflectionAmbientModel:
    """Reflection model rescaled so ``cfg`` at the reference anchor yields the reference rate."""
    ref = ScenarioPoint(cfg.replace(**REFERENCE_ANCHOR), ReflectionAmbientModel())
    return ReflectionAmbientModel(scale=calibrate_ambient_scale(ref, REFERENCE_RATE_BPS))


def ambient_table(base: ScenarioPoint, psd_grid: Sequence[float]) -> TableAmbientModel:
    """Tabulate the total background at ``base``'s fibre length over a PSD grid."""
    rows = [noise_budget(p, channel_budget(p)).n_total
            for p in (base.with_config(psd_w_per_nm=float(s)) for s in psd_grid)]
    return TableAmbientModel(tuple(float(s) for s in psd_grid), tuple(rows), "n_total")
