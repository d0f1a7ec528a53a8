"""Acceptance criteria, one test each.  Every test prints a PASS/FAIL line,
and the collected lines are repeated in the terminal summary."""

import math
import sys
import time

import numpy as np
import pytest

import _oracle
from hdqkd.cli import run
from hdqkd.config import DEFAULT_CONFIG, validate
from hdqkd.fiber import RamanCrossSectionTable, raman_backward, raman_forward
from hdqkd.finite_key import (DecoyStatistics, entropy_d, key_length, key_objective,
                              phase_error_bound, single_events, tau, vacuum_events,
                              phase_error_events)
from hdqkd.owc import ReflectionAmbientModel
from hdqkd.simulator import (ScenarioPoint, ambient_table, calibrated_ambient, evaluate,
                             sweep)

RESULTS = []


def report(number, title, ok, detail, elapsed=None, limit=None):
    timing = "" if elapsed is None else f" [{elapsed:.2f}s / limit {limit:g}s]"
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}: {detail}{timing}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _calibrated_point(cfg):
    """Scenario with the calibrated ambient level injected as a total-background table."""
    base = ScenarioPoint(cfg, calibrated_ambient(cfg))
    table = ambient_table(base, np.geomspace(1e-7, 1e-4, 31))
    return ScenarioPoint(cfg, table)


def test_1_link_budget(capsys):
    t0 = time.perf_counter()
    assert run(["eval", "--l0-km", "5"]) == 0
    out = capsys.readouterr().out
    elapsed = time.perf_counter() - t0
    total = float(next(l for l in out.splitlines() if l.strip().startswith("total  ")).split()[-1])
    ok = abs(total - 20.52) <= 0.5 and elapsed < 1.0
    with capsys.disabled():
        report(1, "link budget", ok, f"eval total loss {total:.3f} dB vs 20.52 +- 0.5 dB",
               elapsed, 1)


def test_2_dimension_crossover(capsys):
    t0 = time.perf_counter()
    cfg = DEFAULT_CONFIG.replace(block_size=1e10, interferometer_transmittance=1.0,
                                 psd_w_per_nm=1e-5, l0_km=5.0)
    r4 = evaluate(_calibrated_point(cfg.replace(dimension=4))).rate_bps
    r2 = evaluate(_calibrated_point(cfg.replace(dimension=2))).rate_bps
    elapsed = time.perf_counter() - t0
    factor = max(r4 / 3.7e5, 3.7e5 / r4) if r4 > 0 else math.inf
    ok = r4 > 0 and r2 == 0.0 and factor <= 3 and elapsed < 5
    with capsys.disabled():
        report(2, "d=4 positive, d=2 zero", ok,
               f"d=4 {r4:.4g} bps (x{factor:.2f} from 3.7e5, limit x3), d=2 {r2:g} bps",
               elapsed, 5)


def test_3_order_of_magnitude_gain(capsys):
    t0 = time.perf_counter()
    cfg = DEFAULT_CONFIG.replace(block_size=1e11, interferometer_transmittance=0.5)
    grid = np.linspace(0.5, 60, 100)
    r4 = [e.rate_bps for e in sweep("fiber_length", grid, _calibrated_point(cfg.replace(dimension=4)))]
    r2 = [e.rate_bps for e in sweep("fiber_length", grid, _calibrated_point(cfg.replace(dimension=2)))]
    elapsed = time.perf_counter() - t0
    ratios = [a / b for a, b in zip(r4, r2) if a > 0 and b > 0]
    worst = min(ratios) if ratios else float("nan")
    ok = bool(ratios) and worst >= 5 and elapsed < 30
    with capsys.disabled():
        report(3, "d=4 over d=2 gain", ok,
               f"min ratio {worst:.2f} over {len(ratios)} mutually positive points (>= 5)",
               elapsed, 30)


def test_4_engine_matches_oracle(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, bad, positive = 0.0, [], 0

    def rel(a, b):
        return abs(a - b) / max(abs(a), abs(b)) if a != b else 0.0

    for i in range(1000):
        changes, counts = _oracle.random_instance(rng)
        cfg = validate(DEFAULT_CONFIG.replace(**changes))
        s = DecoyStatistics(*counts)
        r = key_length(s, cfg)
        args = (s.n_T, s.n_F, s.m_T, s.m_F, cfg.intensities, cfg.intensity_probs,
                cfg.dimension, cfg.f_ec, cfg.eps_cor)
        l_ref, _ = _oracle.key_length(*args, cfg.eps_sec)
        o = _oracle.bounds(*args, r.beta_opt)
        pairs = [("l", r.key_length_bits, l_ref), ("s_T0", r.s_T0, o["s_T0"]),
                 ("s_T1", r.s_T1, o["s_T1"]), ("nu_F1", r.nu_F1, o["nu_F1"])]
        if o["lam"] is not None:
            pairs.append(("lambda_U", r.lambda_U, o["lam"]))
        elif r.key_length_bits != 0:
            bad.append((i, "insufficient statistics but l > 0"))
        positive += r.key_length_bits > 0
        for name, got, ref in pairs:
            e = rel(got, ref)
            worst = max(worst, e)
            if e > 1e-9:
                bad.append((i, name, got, ref))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 10
    with capsys.disabled():
        report(4, "engine vs straight-line oracle", ok,
               f"1000 instances ({positive} with l > 0), worst relative gap {worst:.2e}"
               f" (<= 1e-9), mismatches {bad[:3]}", elapsed, 10)


def test_5_beta_optimizer_dominates_grid(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    failures, worst_gap = 0, 0.0
    for _ in range(100):
        changes, counts = _oracle.random_instance(rng)
        cfg = validate(DEFAULT_CONFIG.replace(**changes))
        s = DecoyStatistics(*counts)
        r = key_length(s, cfg)
        grid = np.geomspace(1e-30, cfg.eps_sec / 22, 1000)
        best = max(key_objective(s, float(b), cfg).value for b in grid)
        if math.isfinite(best):
            gap = best - r.objective
            worst_gap = max(worst_gap, gap)
            failures += gap > 0
        failures += max(best, 0.0) > r.key_length_bits
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 10
    with capsys.disabled():
        report(5, "beta optimizer dominance", ok,
               f"100 scenarios x 1000 grid points, violations {failures},"
               f" largest grid excess {worst_gap:.3g} bits", elapsed, 10)


def test_6_entropy_and_tau(capsys):
    t0 = time.perf_counter()
    dims = [2, 4, 8, 16, 32, 64]
    h_ok = all(entropy_d(0.0, d) == 0.0 and entropy_d((d - 1) / d, d) == math.log2(d)
               for d in dims)
    total = math.fsum(tau(n, DEFAULT_CONFIG) for n in range(51))
    elapsed = time.perf_counter() - t0
    ok = h_ok and abs(total - 1.0) <= 1e-12 and elapsed < 1
    with capsys.disabled():
        report(6, "entropy and photon-number invariants", ok,
               f"h_d exact for d in {dims}: {h_ok}; sum tau_n (n<=50) - 1 = {total - 1:.1e}",
               elapsed, 1)


def test_7_raman_closed_forms(capsys):
    t0 = time.perf_counter()
    cfg = DEFAULT_CONFIG
    g = RamanCrossSectionTable.flat(1e-9)
    lam_d, lam_q, power = 1585.2, 1555.62, 1e-3
    ar = cfg.alpha_raman_per_km
    ls = np.linspace(0.0, 5 / ar, 50001)
    fwd = [raman_forward(power, x, lam_d, lam_q, cfg, g) for x in ls]
    peak = ls[int(np.argmax(fwd))]
    peak_ok = abs(peak - 1 / ar) <= 0.01 / ar
    bound = power * g(lam_d, lam_q) * cfg.receiver_bandwidth_nm / (2 * ar)
    bwd = [raman_backward(power, x, lam_d, lam_q, cfg, g) for x in np.linspace(0, 1e4, 2001)]
    far = raman_backward(power, 1e4, lam_d, lam_q, cfg, g)
    bwd_ok = max(bwd) <= bound and abs(far - bound) <= 1e-6 * bound
    elapsed = time.perf_counter() - t0
    ok = peak_ok and bwd_ok and elapsed < 1
    with capsys.disabled():
        report(7, "Raman closed forms", ok,
               f"forward peak at {peak:.3f} km vs 1/alpha_r = {1 / ar:.3f} km;"
               f" backward at 1e4 km within {abs(far - bound) / bound:.1e} of bound", elapsed, 1)


def _decreasing_steps(rates):
    return sum(b < a for a, b in zip(rates, rates[1:]))


def test_8_monotone_sweeps(capsys):
    t0 = time.perf_counter()
    psd_grid = np.geomspace(1e-7, 1e-4, 40)
    len_grid = np.linspace(0.5, 60, 40)
    checked, violations, strict = 0, 0, 0
    for d in (2, 4):
        for n in (1e10, 1e11):
            cfg = DEFAULT_CONFIG.replace(dimension=d, block_size=n,
                                         interferometer_transmittance=0.5 if n > 1e10 else 1.0)
            models = [ReflectionAmbientModel(), ReflectionAmbientModel(scale=1e-3),
                      calibrated_ambient(cfg)]
            for model in models:
                for axis, grid, base in (("psd", psd_grid, cfg.replace(l0_km=1.0)),
                                         ("fiber_length", len_grid, cfg)):
                    rates = [e.rate_bps for e in sweep(axis, grid, ScenarioPoint(base, model))]
                    checked += len(rates) - 1
                    violations += sum(b > a for a, b in zip(rates, rates[1:]))
                    strict += _decreasing_steps(rates)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and strict > 0 and elapsed < 60
    with capsys.disabled():
        report(8, "monotone sweeps", ok,
               f"{checked} adjacent pairs over d in (2, 4), N in (1e10, 1e11), 3 ambient levels;"
               f" increases {violations}, strict decreases {strict}", elapsed, 60)


def test_9_deterministic_csv(tmp_path, capsys):
    t0 = time.perf_counter()
    same = []
    for cmd in (["sweep-length", "--N", "1e11", "--eta-i", "0.5"],
                ["sweep-psd", "--ambient-scale", "1e-3", "--l0-km", "1"]):
        outs = []
        for k in range(2):
            path = tmp_path / f"{cmd[0]}-{k}.csv"
            assert run(cmd + ["--points", "30", "--out", str(path)]) == 0
            outs.append(path.read_bytes())
        same.append(outs[0] == outs[1])
    elapsed = time.perf_counter() - t0
    ok = all(same) and elapsed < 60
    with capsys.disabled():
        report(9, "byte-identical CSV reruns", ok,
               f"sweep-length identical: {same[0]}, sweep-psd identical: {same[1]}", elapsed, 60)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
