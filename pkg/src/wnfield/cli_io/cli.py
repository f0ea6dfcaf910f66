"""Command-line entry point.

Subcommands: simulate | ensemble | lindblad | verify | export.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time

import numpy as np

from .. import classical_oracle, ensemble, lindblad_oracle
from ..errors import ConfigError, EnsembleAborted, NumericalFailure, \
    TruncationError, WnfieldError
from ..kernel_engine import run_batch
from ..noise import StreamSpec, read_noise_bin, write_noise_bin
from . import outputs, verify
from .config import RunConfig, default_config, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wnfield",
        description="Momentum-lattice simulator for a scalar quantum field "
                    "driven by spacetime white noise.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
            ("simulate", "run one trajectory and write its CSV series"),
            ("ensemble", "run many trajectories and write statistics"),
            ("lindblad", "integrate the single-mode master-equation oracle"),
            ("verify", "run the full acceptance battery"),
            ("export", "convert a noise dump between binary and CSV")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="path to a TOML run configuration")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--trajectories", type=int,
                       help="trajectory count override")
        p.add_argument("--quiet", action="store_true",
                       help="suppress progress output")
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    updates = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError(f"--seed must be a u64, got {args.seed}")
        updates["master_seed"] = args.seed
    if args.trajectories is not None:
        updates["trajectories"] = args.trajectories
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    return cfg


def _out_dir(cfg: RunConfig, args) -> str:
    out = args.out if args.out else cfg._path(cfg.out_dir)
    os.makedirs(out, exist_ok=True)
    return out


def _workers() -> int:
    try:
        return ensemble.default_workers()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg, flush=True)


def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    cfg = _load(args)
    out = _out_dir(cfg, args)
    table = cfg.mode_table()
    dyn = cfg.dynamics(table)
    init = cfg.kernel_init(table)

    want_noise_dump = bool({"noise-bin", "noise-csv"} & set(cfg.formats))
    mu0 = init.mu0_arrays(table)
    mu0_is_zero = all(np.all(part == 0) for part in mu0)
    compare_classical = (init.stochastic and init.kind != "zero"
                         and mu0_is_zero)
    keep = want_noise_dump or compare_classical

    stream = StreamSpec(cfg.master_seed, 0)
    res = run_batch(table, init, dyn, streams=[stream], keep_noise=keep)

    outputs.write_mode_table_csv(os.path.join(out, "mode_table.csv"), table)
    if "csv" in cfg.formats:
        outputs.write_snapshots_csv(os.path.join(out, "snapshots.csv"), res)
        outputs.write_observables_csv(
            os.path.join(out, "observables.csv"), res)
        outputs.write_fields_csv(os.path.join(out, "fields.csv"), res)

    if compare_classical:
        noise = (res.noise_pair, res.noise_sc)
        traj = classical_oracle.run_classical(table, dyn, noise=noise)
        outputs.write_classical_csv(os.path.join(out, "classical.csv"), traj)
        rep = classical_oracle.ehrenfest_compare(
            table, init, dyn, stream, quantum=res, classical=traj)
        outputs.write_compare_json(
            os.path.join(out, "ehrenfest.json"), rep.max_abs, rep.t_at,
            rep.mode_slot, rep.scale)
        _say(args, f"ehrenfest max |quantum - classical| = {rep.max_abs:.3e}"
                   f" (scale {rep.scale:.3e})")

    if "noise-bin" in cfg.formats:
        write_noise_bin(os.path.join(out, "noise.bin"), table, dyn.dt,
                        res.noise_pair[0], res.noise_sc[0])
    if "noise-csv" in cfg.formats:
        outputs.write_noise_csv(os.path.join(out, "noise.csv"), table,
                                res.noise_pair[0], res.noise_sc[0])

    outputs.write_manifest(out, cfg.as_dict(), extra={
        "command": "simulate",
        "master_seed": cfg.master_seed,
        "wall_clock_s": time.monotonic() - t0,
        "status": "completed",
    })
    _say(args, f"simulate: wrote {out} "
               f"(t_max {dyn.t_max}, {dyn.n_steps} steps, "
               f"wall {time.monotonic() - t0:.2f}s)")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    t0 = time.monotonic()
    cfg = _load(args)
    if cfg.trajectories < 1:
        raise ConfigError(
            f"ensemble.trajectories must be >= 1, got {cfg.trajectories}")
    workers = _workers()
    out = _out_dir(cfg, args)
    table = cfg.mode_table()
    dyn = cfg.dynamics(table)
    init = cfg.kernel_init(table)

    stats = ensemble.run_ensemble(table, init, dyn, cfg.trajectories,
                                  cfg.master_seed, workers=workers)
    outputs.write_ensemble_csv(os.path.join(out, "ensemble.csv"), stats)
    slope, se = stats.slope("slope_E_total")
    expected = cfg.lam ** 2 * table.n_modes / 2.0
    payload = outputs.write_fit_json(os.path.join(out, "fit.json"),
                                     slope, se, expected)
    outputs.write_manifest(out, cfg.as_dict(), extra={
        "command": "ensemble",
        "master_seed": cfg.master_seed,
        "wall_clock_s": time.monotonic() - t0,
        "status": "completed",
    })
    _say(args, f"ensemble: M={cfg.trajectories} on {workers} workers; "
               f"total-energy slope {slope:.6g} +/- {se:.2g} "
               f"(expected {expected:.6g}, z={payload['z_score']:.2f})")
    return EXIT_OK


def cmd_lindblad(args) -> int:
    t0 = time.monotonic()
    cfg = _load(args)
    if not cfg.lindblad_enabled:
        raise ConfigError("lindblad.enabled is false in this config")
    out = _out_dir(cfg, args)
    table = cfg.mode_table()
    dyn = cfg.dynamics(table)
    positive = table.sc_energies > 0
    if not np.any(positive):
        raise ConfigError("no self-conjugate mode with E > 0 on this lattice")
    slot = int(np.argmin(np.where(positive, table.sc_energies, np.inf)))
    e = float(table.sc_energies[slot])
    times = dyn.snapshot_steps().astype(np.float64) * dyn.dt
    series = lindblad_oracle.run_single_mode(
        e, cfg.lam, dyn.t_max, times=times, n_max=cfg.lindblad_n_max)
    outputs.write_lindblad_csv(os.path.join(out, "lindblad.csv"), series)
    outputs.write_manifest(out, cfg.as_dict(), extra={
        "command": "lindblad",
        "master_seed": cfg.master_seed,
        "mode_id": int(table.sc_ids[slot]),
        "mode_energy": e,
        "wall_clock_s": time.monotonic() - t0,
        "status": "completed",
    })
    _say(args, f"lindblad: mode E={e:g}, lambda={cfg.lam:g}, "
               f"final <H>={series.energy[-1]:.6g} "
               f"(rate target {cfg.lam ** 2 / 2:.6g}/unit time)")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    workers = _workers()
    results = verify.run_battery(seed=cfg.master_seed, quiet=args.quiet,
                                 workers=workers)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        outputs.write_json(os.path.join(args.out, "verify_report.json"), {
            "seed": cfg.master_seed,
            "criteria": [dataclasses.asdict(r) for r in results],
            "passed": all(r.passed for r in results),
        })
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_export(args) -> int:
    t0 = time.monotonic()
    cfg = _load(args)
    table = cfg.mode_table()
    dyn = cfg.dynamics(table)
    src_dir = cfg._path(cfg.out_dir)
    out = _out_dir(cfg, args)
    bin_path = os.path.join(src_dir, "noise.bin")
    csv_path = os.path.join(src_dir, "noise.csv")
    if os.path.isfile(bin_path):
        dt, pair, sc = read_noise_bin(bin_path, table)
        outputs.write_noise_csv(os.path.join(out, "noise.csv"), table,
                                pair, sc)
        converted = "noise.bin -> noise.csv"
    elif os.path.isfile(csv_path):
        pair, sc = outputs.read_noise_csv(csv_path, table)
        write_noise_bin(os.path.join(out, "noise.bin"), table, dyn.dt,
                        pair, sc)
        converted = "noise.csv -> noise.bin"
    else:
        raise ConfigError(
            f"nothing to export: neither {bin_path} nor {csv_path} exists")
    outputs.write_manifest(out, cfg.as_dict(), extra={
        "command": "export",
        "converted": converted,
        "wall_clock_s": time.monotonic() - t0,
        "status": "completed",
    })
    _say(args, f"export: {converted} in {out}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "lindblad": cmd_lindblad,
    "verify": cmd_verify,
    "export": cmd_export,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        for line in str(exc).splitlines():
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, TruncationError, EnsembleAborted) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except WnfieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
