"""Command line front end: single evaluations, sweeps and config handling."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import DEFAULT_CONFIG, ConfigError, dumps_config, load_config, validate
from .core import linear_to_db
from .fiber import RamanCrossSectionTable
from .owc import ReflectionAmbientModel, TableAmbientModel
from .simulator import (Evaluation, ScenarioPoint, ambient_table, calibrated_ambient,
                        evaluate, sweep)

logger = logging.getLogger("hdqkd")

SCHEMA = "hdqkd-sweep/1"
LENGTH_COLUMNS = ("length_km", "eta_db", "rate_bps", "l_bits", "beta_opt", "n_N")
PSD_COLUMNS = ("psd_w_per_nm", "n_N", "rate_bps", "l_bits", "beta_opt", "eta_db")
FRAME_FLAGS = {"bin": "clock-per-bin", "state": "per-state-clock"}


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def emit_csv(table: Sequence[dict], path, schema: str | None = None) -> None:
    """Write rows as CSV (9 significant digits); ``schema`` adds a leading comment line."""
    if not table:
        raise ValueError("nothing to emit")
    columns = list(table[0])
    if hasattr(path, "write"):
        _write_rows(path, columns, table, schema)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, columns, table, schema)


def _write_rows(fh, columns, table, schema):
    if schema:
        fh.write(f"# schema: {schema}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for row in table:
        w.writerow([_fmt(row[c]) for c in columns])


def _eta_db(ev: Evaluation) -> float:
    eta = ev.channel.eta_total
    return -linear_to_db(eta) if eta > 0 else -math.inf


def length_rows(evals: Sequence[Evaluation]) -> list[dict]:
    return [{
        "length_km": ev.point.config.l0_km + ev.point.config.l1_km,
        "eta_db": _eta_db(ev),
        "rate_bps": ev.result.rate_bps,
        "l_bits": ev.result.key_length_bits,
        "beta_opt": ev.result.beta_opt,
        "n_N": ev.noise.n_total,
    } for ev in evals]


def psd_rows(evals: Sequence[Evaluation]) -> list[dict]:
    return [{
        "psd_w_per_nm": ev.point.config.psd_w_per_nm,
        "n_N": ev.noise.n_total,
        "rate_bps": ev.result.rate_bps,
        "l_bits": ev.result.key_length_bits,
        "beta_opt": ev.result.beta_opt,
        "eta_db": _eta_db(ev),
    } for ev in evals]


def budget_report(ev: Evaluation) -> str:
    """Plain-text loss, noise and key-length summary of one evaluation."""
    cfg = ev.point.config
    ch, nz, r = ev.channel, ev.noise, ev.result

    def db(x):
        return linear_to_db(x) if x > 0 else math.inf

    lines = [
        f"scenario: d={cfg.dimension} N={cfg.block_size:.3g} L0={cfg.l0_km:g} km "
        f"L1={cfg.l1_km:g} km PSD={cfg.psd_w_per_nm:.3g} W/nm eta_i={cfg.interferometer_transmittance:g}",
        "loss budget (dB):",
        f"  wireless (H_DC)   {db(ch.h_dc):8.3f}",
        f"  coupling          {db(ch.eta_coup):8.3f}",
        f"  fiber             {cfg.alpha_db_per_km * (cfg.l0_km + cfg.l1_km):8.3f}",
        f"  AWGs (2x)         {2 * cfg.awg_loss_db:8.3f}",
        f"  detector          {db(ch.eta_det):8.3f}",
        f"  total             {ch.loss_db:8.3f}",
        "background (photons/gate):",
        f"  raman forward     {nz.raman_forward:.4e}",
        f"  raman backward    {nz.raman_backward:.4e}",
        f"  ambient           {nz.ambient:.4e}",
        f"  dark counts       {nz.dark:.4e}",
        f"  total n_N         {nz.n_total:.4e}",
        "finite-key result:",
        f"  e_T               {r.e_T:.5f}",
        f"  s_T0              {r.s_T0:.6g}",
        f"  s_T1              {r.s_T1:.6g}",
        f"  s_F1              {r.s_F1:.6g}",
        f"  nu_F1             {r.nu_F1:.6g}",
        f"  lambda_U          {r.lambda_U:.5f}",
        f"  leak_EC (bits)    {r.leak_ec_bits:.6g}",
        f"  beta_opt          {r.beta_opt:.4e}",
        f"  key length (bits) {r.key_length_bits:.6g}",
        f"  key rate (bps)    {r.rate_bps:.6g}   [{cfg.frame_policy}]",
    ]
    if r.reason:
        lines.append(f"  note              {r.reason}")
    return "\n".join(lines)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="config file (key = value sections)")
    common.add_argument("--d", type=int, help="dimension")
    common.add_argument("--N", type=float, help="block size (pulses)")
    common.add_argument("--l0-km", type=float, help="feeder fibre length L0")
    common.add_argument("--psd", type=float, help="bulb PSD in W/nm")
    common.add_argument("--eta-i", type=float, help="interferometer transmittance")
    common.add_argument("--frame-policy", choices=sorted(FRAME_FLAGS),
                        help="bin: one state per d clock ticks; state: one per tick")
    common.add_argument("--ambient-table", type=Path, help="PSD -> noise override CSV")
    common.add_argument("--ambient-scale", type=float,
                        help="rescale the reflection ambient model")
    common.add_argument("--calibrated-ambient", action="store_true",
                        help="rescale the reflection model to the reference operating point")
    common.add_argument("--gamma-table", type=Path, help="Raman cross-section CSV")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hdqkd", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)
    sub.add_parser("eval", parents=[common], help="evaluate one scenario and print budgets")
    for name, what, lo, hi in (("sweep-psd", "bulb PSD (W/nm)", 1e-7, 1e-4),
                               ("sweep-length", "total fibre length L0+L1 (km)", 0.5, 60.0)):
        s = sub.add_parser(name, parents=[common], help=f"sweep the {what}")
        s.add_argument("--from", dest="start", type=float, default=lo)
        s.add_argument("--to", dest="stop", type=float, default=hi)
        s.add_argument("--points", type=int, default=50)
        s.add_argument("--workers", type=int, default=None)
    sub.add_parser("print-defaults", parents=[common], help="print the nominal config")
    sub.add_parser("validate", parents=[common], help="check a config and exit")
    t = sub.add_parser("ambient-table", parents=[common],
                       help="tabulate total background versus PSD at the current length")
    t.add_argument("--from", dest="start", type=float, default=1e-7)
    t.add_argument("--to", dest="stop", type=float, default=1e-4)
    t.add_argument("--points", type=int, default=31)
    return p


def _resolve(args):
    cfg = load_config(args.config) if args.config else DEFAULT_CONFIG
    changes = {}
    if args.d is not None:
        changes["dimension"] = args.d
    if args.N is not None:
        changes["block_size"] = float(args.N)
    if args.l0_km is not None:
        changes["l0_km"] = args.l0_km
    if args.psd is not None:
        changes["psd_w_per_nm"] = args.psd
    if args.eta_i is not None:
        changes["interferometer_transmittance"] = args.eta_i
    if args.frame_policy:
        changes["frame_policy"] = FRAME_FLAGS[args.frame_policy]
    cfg = validate(cfg.replace(**changes))

    if args.ambient_table:
        ambient = TableAmbientModel.from_csv(args.ambient_table)
    elif args.calibrated_ambient:
        ambient = calibrated_ambient(cfg)
    else:
        ambient = ReflectionAmbientModel()
    if args.ambient_scale is not None:
        if not isinstance(ambient, ReflectionAmbientModel):
            raise ValueError("--ambient-scale applies to the reflection model only")
        ambient = replace(ambient, scale=args.ambient_scale)
    raman = RamanCrossSectionTable.from_csv(args.gamma_table) if args.gamma_table else None
    return ScenarioPoint(cfg, ambient, raman)


def _write_text(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def run(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        point = _resolve(args)
        logger.info("resolved configuration:\n%s", dumps_config(point.config).rstrip())
        logger.info("ambient model: %r; raman table: %r", point.ambient, point.raman)

        if args.cmd == "print-defaults":
            _write_text(dumps_config(point.config), args.out)
        elif args.cmd == "validate":
            print("configuration is valid")
        elif args.cmd == "eval":
            _write_text(budget_report(evaluate(point)) + "\n", args.out)
        elif args.cmd in ("sweep-psd", "sweep-length"):
            if args.points < 1:
                raise ValueError("--points must be >= 1")
            if args.cmd == "sweep-psd":
                grid = np.geomspace(args.start, args.stop, args.points)
                rows = psd_rows(sweep("psd", grid, point, args.workers))
            else:
                grid = np.linspace(args.start, args.stop, args.points)
                rows = length_rows(sweep("fiber_length", grid, point, args.workers))
            emit_csv(rows, args.out or sys.stdout, SCHEMA)
        elif args.cmd == "ambient-table":
            table = ambient_table(point, np.geomspace(args.start, args.stop, args.points))
            if args.out:
                table.to_csv(args.out)
            else:
                emit_csv([{"psd_w_per_nm": p, "n_total_per_gate": v}
                          for p, v in zip(table.psd, table.values)], sys.stdout)
    except (ConfigError, ValueError, OSError, TypeError) as exc:
        print(f"hdqkd: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
