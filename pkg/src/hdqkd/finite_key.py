"""Finite-size decoy-state key length for d-dimensional time-phase QKD.

Three intensities mu1 > mu2 + mu3, mu2 > mu3 >= 0 bound the vacuum and
single-photon detections in the time (T) basis and the single-photon phase
error rate from phase-basis (F) statistics.  Fluctuations use the Gaussian
deviation ``sqrt(n/2 * log(1/beta))``; the key length is maximised over the
free parameter ``beta`` in ``(0, eps_sec/22]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .config import SystemConfig

__all__ = [
    "InsufficientStatistics",
    "DecoyStatistics",
    "KeyRateResult",
    "Bounds",
    "tau",
    "deviation",
    "entropy_d",
    "vacuum_events",
    "single_events",
    "phase_error_events",
    "phase_error_bound",
    "key_objective",
    "objective_values",
    "key_length",
    "rate_bps",
    "golden_section_max",
]

BETA_GRID_POINTS = 200
BETA_FLOOR = 1e-30

_LOGS = {"ln": math.log, "log2": math.log2, "log10": math.log10}


class InsufficientStatistics(ArithmeticError):
    """The decoy bounds leave no single-photon events to estimate a phase error from."""


@dataclass(frozen=True)
class DecoyStatistics:
    """Detections ``n`` and errors ``m`` per basis, indexed by intensity (mu1, mu2, mu3)."""

    n_T: tuple[float, float, float]
    n_F: tuple[float, float, float]
    m_T: tuple[float, float, float]
    m_F: tuple[float, float, float]

    def __post_init__(self):
        for n_name, m_name in (("n_T", "m_T"), ("n_F", "m_F")):
            ns, ms = getattr(self, n_name), getattr(self, m_name)
            if len(ns) != 3 or len(ms) != 3:
                raise ValueError("three intensities expected per basis")
            for n, m in zip(ns, ms):
                if not (m >= 0 and n >= 0 and m <= n * (1 + 1e-12)):
                    raise ValueError(f"need 0 <= {m_name} <= {n_name}, got {m!r} > {n!r}")

    @property
    def total_n_T(self) -> float:
        return sum(self.n_T)

    @property
    def total_n_F(self) -> float:
        return sum(self.n_F)

    @property
    def total_m_T(self) -> float:
        return sum(self.m_T)

    @property
    def total_m_F(self) -> float:
        return sum(self.m_F)

    def detections(self, basis: str) -> tuple[float, float, float]:
        return {"T": self.n_T, "F": self.n_F}[basis]


@dataclass(frozen=True)
class Bounds:
    """All intermediate quantities of the key-length objective at one beta."""

    beta: float
    value: float
    s_T0: float = 0.0
    s_T1: float = 0.0
    s_F0: float = 0.0
    s_F1: float = 0.0
    nu_F1: float = 0.0
    lambda_U: float = 1.0
    leak_ec_bits: float = 0.0
    e_T: float = 0.0
    pa_bits: float = 0.0
    diagnostics: tuple[str, ...] = ()


@dataclass(frozen=True)
class KeyRateResult:
    key_length_bits: float
    beta_opt: float
    s_T0: float
    s_T1: float
    s_F1: float
    nu_F1: float
    lambda_U: float
    leak_ec_bits: float
    e_T: float
    rate_bps: float = 0.0
    s_F0: float = 0.0
    objective: float = -math.inf
    reason: str | None = None
    diagnostics: tuple[str, ...] = field(default=())


def tau(n: int, cfg: SystemConfig) -> float:
    """Probability that a pulse carries ``n`` photons, mixed over the decoy intensities."""
    if n < 0:
        raise ValueError("photon number must be non-negative")
    return _tau(n, tuple(cfg.intensities), tuple(cfg.intensity_probs))


@lru_cache(maxsize=256)
def _tau(n: int, mus: tuple, probs: tuple) -> float:
    fact = math.factorial(n)
    return sum(math.exp(-mu) * mu ** n * p / fact for mu, p in zip(mus, probs))


def deviation(n: float, beta: float, log=math.log) -> float:
    """Gaussian-approximation fluctuation of a count ``n`` at failure probability ``beta``."""
    if n < 0:
        raise ValueError("count must be non-negative")
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    return math.sqrt(n / 2 * log(1 / beta))


def entropy_d(x: float, d: int) -> float:
    """d-ary Shannon entropy in bits (maximum log2 d at x = (d-1)/d)."""
    if not 0.0 <= x < 1.0:
        raise ValueError(f"entropy argument must lie in [0, 1), got {x!r}")
    if x == 0.0:
        return 0.0
    return -x * math.log2(x / (d - 1)) - (1 - x) * math.log2(1 - x)


def _entropy_capped(x: float, d: int) -> float:
    # h_d decreases past its maximum; rates above (d-1)/d are no better than random
    top = (d - 1) / d
    return math.log2(d) if x >= top else entropy_d(max(x, 0.0), d)


def _log(cfg: SystemConfig):
    return _LOGS[cfg.deviation_log]


def _decoy_params(cfg: SystemConfig):
    mu1, mu2, mu3 = cfg.intensities
    p1, p2, p3 = cfg.intensity_probs
    if min(p1, p2, p3) <= 0:
        raise InsufficientStatistics("every intensity needs a non-zero probability")
    return mu1, mu2, mu3, p1, p2, p3


def _vacuum_raw(stats: DecoyStatistics, beta: float, cfg: SystemConfig, basis: str) -> float:
    mu1, mu2, mu3, p1, p2, p3 = _decoy_params(cfg)
    n = stats.detections(basis)
    dev = deviation(sum(n), beta, _log(cfg))
    return tau(0, cfg) / (mu2 - mu3) * (mu2 * math.exp(mu3) * (n[2] - dev) / p3
                                        - mu3 * math.exp(mu2) * (n[1] + dev) / p2)


def vacuum_events(stats: DecoyStatistics, beta: float, cfg: SystemConfig,
                  basis: str = "T") -> float:
    """Lower bound on vacuum-contribution detections in ``basis``."""
    return max(_vacuum_raw(stats, beta, cfg, basis), 0.0)


def _single_raw(stats: DecoyStatistics, basis: str, s0: float, beta: float,
                cfg: SystemConfig) -> float:
    mu1, mu2, mu3, p1, p2, p3 = _decoy_params(cfg)
    n = stats.detections(basis)
    dev = deviation(sum(n), beta, _log(cfg))
    sq = mu2 ** 2 - mu3 ** 2
    pref = mu1 * tau(1, cfg) / (mu1 * (mu2 - mu3) - sq)
    # the mu1 term is read as exp(mu1) * n1^+ / p1, like its siblings
    return pref * (math.exp(mu2) * (n[1] - dev) / p2
                   - math.exp(mu3) * (n[2] + dev) / p3
                   + sq / mu1 ** 2 * (s0 / tau(0, cfg) - math.exp(mu1) * (n[0] + dev) / p1))


def single_events(stats: DecoyStatistics, basis: str, s0: float, beta: float,
                  cfg: SystemConfig) -> float:
    """Lower bound on single-photon detections in ``basis``; ``s0`` from the same basis."""
    return max(_single_raw(stats, basis, s0, beta, cfg), 0.0)


def _phase_error_raw(stats: DecoyStatistics, beta: float, cfg: SystemConfig) -> float:
    mu1, mu2, mu3, p1, p2, p3 = _decoy_params(cfg)
    m = stats.m_F
    dev = deviation(sum(m), beta, _log(cfg))
    return tau(1, cfg) / (mu2 - mu3) * (math.exp(mu2) * (m[1] + dev) / p2
                                        - math.exp(mu3) * (m[2] - dev) / p3)


def phase_error_events(stats: DecoyStatistics, beta: float, cfg: SystemConfig) -> float:
    """Upper bound on single-photon errors in the phase basis, floored at zero."""
    return max(_phase_error_raw(stats, beta, cfg), 0.0)


def phase_error_bound(s_T1: float, s_F1: float, nu_F1: float, beta: float,
                      log=math.log) -> float:
    """Upper bound on the single-photon phase error rate, capped at 1."""
    if s_T1 <= 0 or s_F1 <= 0:
        raise InsufficientStatistics("no single-photon events in one of the bases")
    xi = math.sqrt((s_T1 + s_F1) * (s_F1 + 1) / (s_T1 * s_F1 ** 2) * log(2 / beta))
    return min(nu_F1 / s_F1 + xi, 1.0)


def time_basis_error(stats: DecoyStatistics, cfg: SystemConfig) -> float:
    """Probability-weighted average of the per-intensity time-basis error rates."""
    return sum(p * (m / n if n > 0 else 0.0)
               for p, n, m in zip(cfg.intensity_probs, stats.n_T, stats.m_T))


def key_objective(stats: DecoyStatistics, beta: float, cfg: SystemConfig) -> Bounds:
    """Unclamped key length at a fixed ``beta`` (``-inf`` without usable statistics)."""
    d = cfg.dimension
    log = _log(cfg)
    notes = []
    e_T = time_basis_error(stats, cfg)
    leak = cfg.f_ec * _entropy_capped(e_T, d) * stats.total_n_T
    pa = math.log2(32) - 8 * math.log2(beta) - math.log2(cfg.eps_cor)
    try:
        _decoy_params(cfg)
    except InsufficientStatistics:
        return Bounds(beta, -math.inf, leak_ec_bits=leak, e_T=e_T, pa_bits=pa,
                      diagnostics=("insufficient-statistics",))
    raw0 = _vacuum_raw(stats, beta, cfg, "T")
    raw0f = _vacuum_raw(stats, beta, cfg, "F")
    s_T0, s_F0 = max(raw0, 0.0), max(raw0f, 0.0)
    raw1 = _single_raw(stats, "T", s_T0, beta, cfg)
    raw1f = _single_raw(stats, "F", s_F0, beta, cfg)
    s_T1, s_F1 = max(raw1, 0.0), max(raw1f, 0.0)
    raw_nu = _phase_error_raw(stats, beta, cfg)
    nu = max(raw_nu, 0.0)
    for label, raw in (("s_T0", raw0), ("s_F0", raw0f), ("s_T1", raw1),
                       ("s_F1", raw1f), ("nu_F1", raw_nu)):
        if raw < 0:
            notes.append(f"{label} clamped to 0")
    try:
        lam = phase_error_bound(s_T1, s_F1, nu, beta, log)
    except InsufficientStatistics:
        return Bounds(beta, -math.inf, s_T0, s_T1, s_F0, s_F1, nu, 1.0, leak, e_T, pa,
                      tuple(notes) + ("insufficient-statistics",))
    value = (math.log2(d) * s_T0 + s_T1 * (math.log2(d) - _entropy_capped(lam, d))
             - leak - pa)
    return Bounds(beta, value, s_T0, s_T1, s_F0, s_F1, nu, lam, leak, e_T, pa, tuple(notes))


_NP_LOGS = {"ln": np.log, "log2": np.log2, "log10": np.log10}


def objective_values(stats: DecoyStatistics, betas, cfg: SystemConfig) -> np.ndarray:
    """Vectorised :func:`key_objective` value over an array of ``betas``."""
    b = np.asarray(betas, dtype=float)
    mu1, mu2, mu3, p1, p2, p3 = _decoy_params(cfg)
    d = cfg.dimension
    ld = math.log2(d)
    t0, t1 = tau(0, cfg), tau(1, cfg)
    inv = _NP_LOGS[cfg.deviation_log](1.0 / b)
    e_T = time_basis_error(stats, cfg)
    leak = cfg.f_ec * _entropy_capped(e_T, d) * stats.total_n_T
    pa = math.log2(32) - 8 * np.log2(b) - math.log2(cfg.eps_cor)
    sq = mu2 ** 2 - mu3 ** 2
    pref = mu1 * t1 / (mu1 * (mu2 - mu3) - sq)

    def s01(n):
        dev = np.sqrt(sum(n) / 2 * inv)
        s0 = np.maximum(t0 / (mu2 - mu3) * (mu2 * math.exp(mu3) * (n[2] - dev) / p3
                                            - mu3 * math.exp(mu2) * (n[1] + dev) / p2), 0.0)
        s1 = pref * (math.exp(mu2) * (n[1] - dev) / p2 - math.exp(mu3) * (n[2] + dev) / p3
                     + sq / mu1 ** 2 * (s0 / t0 - math.exp(mu1) * (n[0] + dev) / p1))
        return s0, np.maximum(s1, 0.0)

    s_T0, s_T1 = s01(stats.n_T)
    _, s_F1 = s01(stats.n_F)
    m = stats.m_F
    dev_m = np.sqrt(sum(m) / 2 * inv)
    nu = np.maximum(t1 / (mu2 - mu3) * (math.exp(mu2) * (m[1] + dev_m) / p2
                                        - math.exp(mu3) * (m[2] - dev_m) / p3), 0.0)
    ok = (s_T1 > 0) & (s_F1 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = np.sqrt((s_T1 + s_F1) * (s_F1 + 1) / (s_T1 * s_F1 ** 2)
                     * _NP_LOGS[cfg.deviation_log](2.0 / b))
        lam = np.minimum(nu / s_F1 + xi, 1.0)
    top = (d - 1) / d
    lam_c = np.where(ok, np.clip(lam, 0.0, top), top)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(lam_c >= top, ld,
                     np.where(lam_c > 0, -lam_c * np.log2(lam_c / (d - 1))
                              - (1 - lam_c) * np.log2(1 - lam_c), 0.0))
    value = ld * s_T0 + s_T1 * (ld - h) - leak - pa
    return np.where(ok, value, -np.inf)


def golden_section_max(f, a: float, b: float, tol: float = 1e-6, max_iter: int = 200):
    """Maximise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    inv_phi = (math.sqrt(5) - 1) / 2
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * (abs(a) + abs(b) + 1e-300):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def beta_upper(cfg: SystemConfig) -> float:
    return cfg.eps_sec / 22


def key_length(stats: DecoyStatistics, cfg: SystemConfig) -> KeyRateResult:
    """Maximise the key length over beta and report the bounds at the optimum.

    A 200-point log grid over ``[1e-30, eps_sec/22]`` locates the best region
    (the objective is unimodal in practice but the grid guards against
    plateaus); golden-section search in log(beta) refines it between the
    neighbouring grid points.  The grid's upper end is the supremum of the
    admissible interval and is evaluated directly.
    """
    hi = beta_upper(cfg)
    lo = min(BETA_FLOOR, hi * 1e-6)
    grid = np.geomspace(lo, hi, BETA_GRID_POINTS)
    try:
        values = objective_values(stats, grid, cfg)
    except InsufficientStatistics:
        values = np.full(len(grid), -np.inf)
    i = int(np.argmax(values))
    best = key_objective(stats, float(grid[i]), cfg)
    if math.isfinite(best.value):
        ja, jb = max(i - 1, 0), min(i + 1, len(grid) - 1)
        if jb > ja:
            x, v = golden_section_max(
                lambda t: key_objective(stats, math.exp(t), cfg).value,
                math.log(grid[ja]), math.log(grid[jb]), tol=1e-10)
            if v > best.value:
                best = key_objective(stats, math.exp(x), cfg)

    if not math.isfinite(best.value):
        best = key_objective(stats, hi, cfg)
        reason = "insufficient-statistics"
    elif best.value <= 0:
        reason = "non-positive-key"
    else:
        reason = None
    result = KeyRateResult(
        key_length_bits=max(best.value, 0.0) if math.isfinite(best.value) else 0.0,
        beta_opt=best.beta,
        s_T0=best.s_T0,
        s_T1=best.s_T1,
        s_F1=best.s_F1,
        nu_F1=best.nu_F1,
        lambda_U=best.lambda_U,
        leak_ec_bits=best.leak_ec_bits,
        e_T=best.e_T,
        s_F0=best.s_F0,
        objective=best.value,
        reason=reason,
        diagnostics=best.diagnostics,
    )
    return replace(result, rate_bps=rate_bps(result, cfg))


def states_per_second(cfg: SystemConfig) -> float:
    """State repetition rate: one state per clock tick, or one per d time bins."""
    if cfg.frame_policy == "clock-per-bin":
        return cfg.clock_rate_hz / cfg.dimension
    return cfg.clock_rate_hz


def rate_bps(result: KeyRateResult, cfg: SystemConfig) -> float:
    """Secret-key rate in bits per second for a block of ``cfg.block_size`` states."""
    return result.key_length_bits / cfg.block_size * states_per_second(cfg)
