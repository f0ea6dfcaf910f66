"""TOML run configuration: schema, defaults, validation.

Every key has a default, so an empty document is a valid run.  Unknown
sections or keys are rejected, and validation reports every violation at
once rather than stopping at the first.

Schema (defaults in parentheses):

    [lattice]   dim (1), sites (8), length (8.0), mass (1.0)
    [dynamics]  dt (from the resolution rule below), t_max (10.0),
                lambda (0.1), scheme ("exact"), snapshot_stride (auto)
    [init]      v0 ("vacuum" | "scaled" | "zero" | "deterministic" |
                "file"), v0_scale ([1.0, 0.0], used by "scaled"),
                v0_file, mu0 ("zero" | "file"), mu0_file
    [ensemble]  trajectories (100), master_seed (20260817)
    [lindblad]  n_max (60), enabled (true)
    [output]    dir ("runs"), formats (["csv"]; may add "noise-bin",
                "noise-csv")

When dt is omitted it is derived from the stiffest mode: dt_0 =
0.01 / max E_p, n_steps = ceil(t_max / dt_0), dt = t_max / n_steps.  An
explicit dt must divide t_max to within 1e-9.  snapshot_stride defaults
to about 200 output rows per run.

Kernel files are CSV with header mode_id,re,im.  A v0 file must cover
every independent and self-conjugate mode; a mu0 file may cover any
subset (missing modes start at zero).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from ..errors import ConfigError, DegenerateKernelError
from ..kernel_engine import DynamicsParams, KernelInit
from ..lattice import (INDEPENDENT, SELF_CONJUGATE, LatticeSpec, ModeTable,
                       build_mode_table)

V0_KINDS = ("vacuum", "scaled", "zero", "deterministic", "file")
MU0_KINDS = ("zero", "file")
SCHEMES = ("exact", "euler")
FORMATS = ("csv", "noise-bin", "noise-csv")

_U64 = (1 << 64) - 1


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return _is_int(v) or isinstance(v, float)


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration."""

    dim: int = 1
    sites: int = 8
    length: float = 8.0
    mass: float = 1.0

    dt: float | None = None
    t_max: float = 10.0
    lam: float = 0.1
    scheme: str = "exact"
    snapshot_stride: int | None = None

    v0_kind: str = "vacuum"
    v0_scale: complex = 1.0 + 0.0j
    v0_file: str | None = None
    mu0_kind: str = "zero"
    mu0_file: str | None = None

    trajectories: int = 100
    master_seed: int = 20260817

    lindblad_n_max: int = 60
    lindblad_enabled: bool = True

    out_dir: str = "runs"
    formats: tuple = ("csv",)

    base_dir: str = "."

    def lattice_spec(self) -> LatticeSpec:
        return LatticeSpec(dim=self.dim, sites_per_dim=self.sites,
                           box_length=self.length, mass=self.mass)

    def mode_table(self) -> ModeTable:
        return build_mode_table(self.lattice_spec())

    def dynamics(self, table: ModeTable) -> DynamicsParams:
        e_max = float(np.max(table.energies))
        if self.dt is None:
            dt0 = 0.01 / e_max
            n_steps = max(1, math.ceil(self.t_max / dt0))
            dt = self.t_max / n_steps
        else:
            dt = self.dt
            n_steps = int(round(self.t_max / dt))
            if n_steps < 1 or abs(n_steps * dt - self.t_max) > \
                    1e-9 * max(1.0, self.t_max):
                raise ConfigError(
                    f"dynamics.dt = {dt} does not divide t_max = {self.t_max}")
        stride = self.snapshot_stride or max(1, n_steps // 200)
        return DynamicsParams(dt=dt, n_steps=n_steps, lam=self.lam,
                              scheme=self.scheme, snapshot_stride=stride)

    def kernel_init(self, table: ModeTable) -> KernelInit:
        kw = {}
        if self.v0_kind == "file":
            v0 = _read_kernel_csv(self._path(self.v0_file), table,
                                  require_all=True)[0]
            kw.update(kind="custom",
                      v0_pair=v0[table.pair_plus],
                      v0_sc=v0[table.sc_ids])
        else:
            kw.update(kind=self.v0_kind, scale=self.v0_scale)
        if self.mu0_kind == "file":
            mu0 = _read_kernel_csv(self._path(self.mu0_file), table,
                                   require_all=False)[0]
            kw.update(mu0_plus=mu0[table.pair_plus],
                      mu0_minus=mu0[table.pair_minus],
                      mu0_sc=mu0[table.sc_ids])
        init = KernelInit(**kw)
        try:
            init.v0_arrays(table)
        except DegenerateKernelError as exc:
            raise ConfigError(str(exc)) from exc
        return init

    def _path(self, name: str) -> str:
        return name if os.path.isabs(name) else os.path.join(
            self.base_dir, name)

    def as_dict(self) -> dict:
        return {
            "lattice": {"dim": self.dim, "sites": self.sites,
                        "length": self.length, "mass": self.mass},
            "dynamics": {"dt": self.dt, "t_max": self.t_max,
                         "lambda": self.lam, "scheme": self.scheme,
                         "snapshot_stride": self.snapshot_stride},
            "init": {"v0": self.v0_kind,
                     "v0_scale": [self.v0_scale.real, self.v0_scale.imag],
                     "v0_file": self.v0_file,
                     "mu0": self.mu0_kind, "mu0_file": self.mu0_file},
            "ensemble": {"trajectories": self.trajectories,
                         "master_seed": self.master_seed},
            "lindblad": {"n_max": self.lindblad_n_max,
                         "enabled": self.lindblad_enabled},
            "output": {"dir": self.out_dir, "formats": list(self.formats)},
        }


def _read_kernel_csv(path: str, table: ModeTable, require_all: bool):
    """Read mode_id,re,im rows into a full-lattice complex array."""
    values = np.zeros(table.n_modes, dtype=np.complex128)
    seen = np.zeros(table.n_modes, dtype=bool)
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["mode_id", "re", "im"]:
                raise ConfigError(
                    f"{path}: expected header mode_id,re,im, got "
                    f"{reader.fieldnames}")
            for row in reader:
                mid = int(row["mode_id"])
                if not 0 <= mid < table.n_modes:
                    raise ConfigError(f"{path}: mode_id {mid} out of range")
                if seen[mid]:
                    raise ConfigError(f"{path}: duplicate mode_id {mid}")
                seen[mid] = True
                values[mid] = float(row["re"]) + 1j * float(row["im"])
    except OSError as exc:
        raise ConfigError(f"cannot read kernel file {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: malformed kernel row: {exc}") from exc
    if require_all:
        needed = (table.kind == INDEPENDENT) | (table.kind == SELF_CONJUGATE)
        missing = np.flatnonzero(needed & ~seen)
        if missing.size:
            raise ConfigError(
                f"{path}: missing v0 for mode ids {missing.tolist()[:8]}")
    return values, seen


_SCHEMA = {
    "lattice": ("dim", "sites", "length", "mass"),
    "dynamics": ("dt", "t_max", "lambda", "scheme", "snapshot_stride"),
    "init": ("v0", "v0_scale", "v0_file", "mu0", "mu0_file"),
    "ensemble": ("trajectories", "master_seed"),
    "lindblad": ("n_max", "enabled"),
    "output": ("dir", "formats"),
}


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse and validate a TOML run configuration document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}") from exc

    bad: list[str] = []
    for section, content in doc.items():
        if section not in _SCHEMA:
            bad.append(f"unknown section [{section}]")
        elif not isinstance(content, dict):
            bad.append(f"[{section}] must be a table")
        else:
            for key in content:
                if key not in _SCHEMA[section]:
                    bad.append(f"unknown key {section}.{key}")
    if bad:
        raise ConfigError(bad)

    def get(section, key, default=None):
        return doc.get(section, {}).get(key, default)

    kw: dict = {"base_dir": base_dir}

    def take(name, section, key, check, default=None, coerce=None):
        v = get(section, key, default)
        if v is default or v is None:
            kw[name] = default
            return
        err = check(v)
        if err:
            bad.append(f"{section}.{key}: {err}")
        else:
            kw[name] = coerce(v) if coerce else v

    def pos_int(lo=1, hi=None):
        def chk(v):
            if not _is_int(v):
                return f"expected an integer, got {v!r}"
            if v < lo or (hi is not None and v > hi):
                return f"{v} out of range [{lo}, {hi or 'inf'}]"
        return chk

    def pos_float(lo=None, lo_open=True):
        def chk(v):
            if not _is_num(v):
                return f"expected a number, got {v!r}"
            if lo is not None and (v <= lo if lo_open else v < lo):
                return f"{v} must be {'>' if lo_open else '>='} {lo}"
        return chk

    def choice(options):
        def chk(v):
            if not isinstance(v, str) or v not in options:
                return f"expected one of {list(options)}, got {v!r}"
        return chk

    def str_field(v):
        if not isinstance(v, str) or not v:
            return f"expected a nonempty string, got {v!r}"

    take("dim", "lattice", "dim", pos_int(1, 3), 1)
    take("sites", "lattice", "sites", pos_int(2, 512), 8)
    take("length", "lattice", "length", pos_float(0.0), 8.0, float)
    take("mass", "lattice", "mass", pos_float(0.0, lo_open=False), 1.0, float)

    take("dt", "dynamics", "dt", pos_float(0.0), None, float)
    take("t_max", "dynamics", "t_max", pos_float(0.0), 10.0, float)
    take("lam", "dynamics", "lambda", pos_float(0.0, lo_open=False),
         0.1, float)
    take("scheme", "dynamics", "scheme", choice(SCHEMES), "exact")
    take("snapshot_stride", "dynamics", "snapshot_stride",
         pos_int(1), None)

    take("v0_kind", "init", "v0", choice(V0_KINDS), "vacuum")
    take("mu0_kind", "init", "mu0", choice(MU0_KINDS), "zero")
    take("v0_file", "init", "v0_file", str_field, None)
    take("mu0_file", "init", "mu0_file", str_field, None)

    scale = get("init", "v0_scale", [1.0, 0.0])
    if (not isinstance(scale, list) or len(scale) != 2
            or not all(_is_num(v) for v in scale)):
        bad.append(f"init.v0_scale: expected [re, im], got {scale!r}")
    else:
        kw["v0_scale"] = complex(float(scale[0]), float(scale[1]))
        if kw.get("v0_kind", "vacuum") == "scaled" and kw["v0_scale"].real <= 0:
            bad.append("init.v0_scale: scaled kernel needs Re(scale) > 0")

    take("trajectories", "ensemble", "trajectories", pos_int(1), 100)
    take("master_seed", "ensemble", "master_seed", pos_int(0, _U64), 20260817)

    take("lindblad_n_max", "lindblad", "n_max", pos_int(2, 4096), 60)
    enabled = get("lindblad", "enabled", True)
    if not isinstance(enabled, bool):
        bad.append(f"lindblad.enabled: expected a boolean, got {enabled!r}")
    else:
        kw["lindblad_enabled"] = enabled

    take("out_dir", "output", "dir", str_field, "runs")
    formats = get("output", "formats", ["csv"])
    if (not isinstance(formats, list) or not formats
            or not all(isinstance(f, str) for f in formats)):
        bad.append(f"output.formats: expected a list of strings, got {formats!r}")
    else:
        unknown = [f for f in formats if f not in FORMATS]
        if unknown:
            bad.append(f"output.formats: unknown formats {unknown}; "
                       f"valid: {list(FORMATS)}")
        else:
            kw["formats"] = tuple(dict.fromkeys(formats))

    # cross-field rules
    dim = kw.get("dim", 1)
    sites = kw.get("sites", 8)
    if sites ** dim > 1 << 20:
        bad.append(
            f"lattice: {sites}^{dim} modes exceed the 2^20 mode budget")
    v0_kind = kw.get("v0_kind", "vacuum")
    if v0_kind == "file" and not kw.get("v0_file"):
        bad.append("init.v0 = 'file' needs init.v0_file")
    if kw.get("mu0_kind", "zero") == "file" and not kw.get("mu0_file"):
        bad.append("init.mu0 = 'file' needs init.mu0_file")
    if kw.get("scheme", "exact") == "euler" and v0_kind in (
            "zero", "deterministic"):
        bad.append(f"init.v0 = '{v0_kind}' requires dynamics.scheme = 'exact'")
    if v0_kind == "deterministic" and kw.get("lam", 0.1) != 0.0:
        bad.append("init.v0 = 'deterministic' requires dynamics.lambda = 0")

    if bad:
        raise ConfigError(bad)
    cfg = RunConfig(**kw)
    if cfg.dt is not None:
        cfg.dynamics(cfg.mode_table())  # surfaces the divisibility rule
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def default_config() -> RunConfig:
    return RunConfig()
