"""Exact evolution of the Gaussian kernels V(p, t) and mu(p, t).

The state of the driven field is a Gaussian functional with exponent

    -(kappa/2) sum_p V(p, t) |phi(p)|^2 + kappa sum_p mu(p, t) phi(p)

(kappa = quad_weight; the normalization is not tracked).  V obeys a
Riccati equation dV/dt = -i V^2 + i E^2 whose solution is carried by the
linear phase function

    f(t) = cos(t E) + i (V0 / E) sin(t E),      V(t) = -i f'(t) / f(t)

so V(t) = (V0 cos(tE) + i E sin(tE)) / f(t) and the two-time propagator
exp(-i int_{t1}^{t2} V dt) equals f(t1)/f(t2).  mu obeys the linear Ito
SDE d mu = -i V mu dt + i lambda dW, integrated either exactly,

    mu(t2) = (f(t1)/f(t2)) * (mu(t1) + i lambda dW),

or by Euler-Maruyama.  Special kernels: V0 = E is stationary (vacuum),
V0 = 0 gives V = i E tan(tE) (f = cos), and the V0 -> infinity limit
gives V = -i E cot(tE), represented exactly by the "deterministic" kind
with phase g(t) = sin(tE)/E.  All formulas use sin(tE)/E = t sinc so the
E -> 0 mode is the exact limit f = 1 + i V0 t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import (ConfigError, DegenerateKernelError, KernelSingularError,
                     NumericalFailure)
from .lattice import ModeTable
from .noise import NoiseSlice, StreamSpec, sample_block

_SING_TOL = 1e-12

VALID_KINDS = ("vacuum", "scaled", "zero", "deterministic", "custom")


# --- closed-form Riccati flow ------------------------------------------------

def _sine_over_e(e, t):
    # sin(tE)/E, exact at E = 0
    e = np.asarray(e, dtype=float)
    return t * np.sinc(t * e / np.pi)


def phase_fn(v0, e, t):
    """f(t) = cos(tE) + i V0 sin(tE)/E; exp(-i int_0^t V) = 1/f(t)."""
    return np.cos(np.multiply(t, e)) + 1j * np.asarray(v0) * _sine_over_e(e, t)


def riccati_rhs(v, e):
    """dV/dt = -i V^2 + i E^2."""
    v = np.asarray(v)
    return -1j * v * v + 1j * np.square(e)


def riccati_exact(v0, e, t):
    """Closed-form V(t) = (V0 cos(tE) + i E sin(tE)) / f(t)."""
    c = np.cos(np.multiply(t, e))
    s = _sine_over_e(e, t)
    den = c + 1j * np.asarray(v0) * s
    num = np.asarray(v0) * c + 1j * np.square(e) * s
    _check_phase(den, t)
    return num / den


def propagator(v0, e, t1, t2):
    """exp(-i int_{t1}^{t2} V dt) = f(t1) / f(t2) for t1 <= t2."""
    den = phase_fn(v0, e, t2)
    _check_phase(den, t2)
    return phase_fn(v0, e, t1) / den


def _check_phase(g, t):
    g = np.asarray(g)
    bad = ~np.isfinite(g)
    mag = np.abs(np.where(bad, 1.0, g))
    scale = max(1.0, float(mag.max())) if mag.size else 1.0
    small = mag < _SING_TOL * scale
    if np.any(bad | small):
        raise KernelSingularError(
            "phase function vanished: kernel flow hit a caustic", t=_at(t))


def _at(t):
    t = np.asarray(t, dtype=float)
    return float(t.reshape(-1)[0]) if t.size else None


# --- kernel initial data ------------------------------------------------------

@dataclass(frozen=True)
class KernelInit:
    """Initial kernels.

    kind selects V0: "vacuum" (V0 = E), "scaled" (V0 = scale * E),
    "zero" (V0 = 0, f = cos), "deterministic" (V0 -> infinity limit,
    g = sin(tE)/E), or "custom" with explicit per-pair/per-sc arrays.
    mu arrays default to zero; mu0_minus holds mu(-p) for each pair.
    """

    kind: str = "vacuum"
    scale: complex = 1.0 + 0.0j
    v0_pair: np.ndarray | None = None
    v0_sc: np.ndarray | None = None
    mu0_plus: np.ndarray | None = None
    mu0_minus: np.ndarray | None = None
    mu0_sc: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "scaled" and not complex(self.scale).real > 0:
            raise ConfigError("scaled kernel needs Re(scale) > 0")
        if self.kind == "custom":
            if self.v0_pair is None or self.v0_sc is None:
                raise ConfigError("custom kernel needs v0 arrays")

    @property
    def stochastic(self) -> bool:
        """Whether mu carries noise (false only for the deterministic kind)."""
        return self.kind != "deterministic"

    def v0_arrays(self, table: ModeTable):
        """Resolve (v0_pair, v0_sc) arrays; None for the deterministic kind."""
        if self.kind == "deterministic":
            return None, None
        if self.kind == "vacuum":
            return (table.pair_energies.astype(np.complex128),
                    table.sc_energies.astype(np.complex128))
        if self.kind == "scaled":
            c = complex(self.scale)
            return c * table.pair_energies, c * table.sc_energies
        if self.kind == "zero":
            return (np.zeros(table.n_pairs, dtype=np.complex128),
                    np.zeros(table.n_sc, dtype=np.complex128))
        v0p = np.asarray(self.v0_pair, dtype=np.complex128)
        v0s = np.asarray(self.v0_sc, dtype=np.complex128)
        if v0p.shape != (table.n_pairs,) or v0s.shape != (table.n_sc,):
            raise ConfigError("custom v0 arrays do not match the lattice")
        if np.any(v0p.real <= 0) or np.any(v0s.real <= 0):
            raise DegenerateKernelError("custom V0 needs Re V0 > 0")
        return v0p, v0s

    def mu0_arrays(self, table: ModeTable):
        zp = np.zeros(table.n_pairs, dtype=np.complex128)
        zs = np.zeros(table.n_sc, dtype=np.complex128)
        mp = zp if self.mu0_plus is None else np.asarray(
            self.mu0_plus, dtype=np.complex128)
        mm = zp.copy() if self.mu0_minus is None else np.asarray(
            self.mu0_minus, dtype=np.complex128)
        ms = zs if self.mu0_sc is None else np.asarray(
            self.mu0_sc, dtype=np.complex128)
        if mp.shape != (table.n_pairs,) or mm.shape != (table.n_pairs,):
            raise ConfigError("mu0 pair arrays do not match the lattice")
        if ms.shape != (table.n_sc,):
            raise ConfigError("mu0 sc array does not match the lattice")
        return mp.copy(), mm.copy(), ms.copy()


def vacuum_init() -> KernelInit:
    return KernelInit(kind="vacuum")


@dataclass(frozen=True)
class KernelState:
    """Kernels at one instant, split into paired and self-conjugate modes.

    mu_plus[j]/mu_minus[j] are mu(p)/mu(-p) for pair j; v_pair[j] is the
    shared V of the pair (V(-p) = V(p)).
    """

    t: float
    v_pair: np.ndarray   # (n_pairs,) complex128
    v_sc: np.ndarray     # (n_sc,) complex128
    mu_plus: np.ndarray  # (n_pairs,) complex128
    mu_minus: np.ndarray
    mu_sc: np.ndarray    # (n_sc,) complex128


def kernel_values(init: KernelInit, table: ModeTable, t):
    """(V, phase) arrays for pairs and sc modes at times t.

    t may be scalar or (n_t,); arrays come back with a leading time axis
    when t has one.  For the deterministic kind the phase is g = sin(tE)/E
    and V = -i g'(t)/g = -i E cot(tE).
    """
    t = np.asarray(t, dtype=float)
    tcol = t[..., None]
    ep = table.pair_energies
    es = table.sc_energies
    if init.kind == "deterministic":
        gp = _sine_over_e(ep, tcol)
        gs = _sine_over_e(es, tcol)
        with np.errstate(divide="ignore", invalid="ignore"):
            vp = -1j * np.cos(tcol * ep) / gp
            vs = -1j * np.cos(tcol * es) / gs
        return vp, vs, gp.astype(np.complex128), gs.astype(np.complex128)
    v0p, v0s = init.v0_arrays(table)
    gp = phase_fn(v0p, ep, tcol)
    gs = phase_fn(v0s, es, tcol)
    with np.errstate(divide="ignore", invalid="ignore"):
        vp = (v0p * np.cos(tcol * ep) + 1j * np.square(ep) * _sine_over_e(ep, tcol)) / gp
        vs = (v0s * np.cos(tcol * es) + 1j * np.square(es) * _sine_over_e(es, tcol)) / gs
    return vp, vs, gp, gs


def initial_state(table: ModeTable, init: KernelInit) -> KernelState:
    vp, vs, _, _ = kernel_values(init, table, 0.0)
    mp, mm, ms = init.mu0_arrays(table)
    return KernelState(t=0.0, v_pair=vp, v_sc=vs,
                       mu_plus=mp, mu_minus=mm, mu_sc=ms)


# --- single steps -------------------------------------------------------------

def mu_step_exact(mu, dw, prop, lam):
    """mu' = prop * (mu + i lambda dW): kick, then free propagation."""
    return prop * (mu + 1j * lam * dw)


def mu_step_em(mu, v, dw, dt, lam):
    """Euler-Maruyama: mu' = mu + (-i dt V mu) + i lambda dW."""
    return mu + (-1j * dt) * mu * v + 1j * lam * dw


def evolve(state: KernelState, sl: NoiseSlice, init: KernelInit,
           table: ModeTable, lam: float, scheme: str = "exact") -> KernelState:
    """Advance one slice.  Returns a new state at t + dt."""
    if scheme not in ("exact", "euler"):
        raise ConfigError(f"unknown scheme {scheme!r}")
    if scheme == "euler" and init.kind in ("zero", "deterministic"):
        raise ConfigError(
            f"{init.kind} kernels require the exact scheme (V is singular)")
    dt = sl.dt
    t2 = state.t + dt
    vp2, vs2, g2p, g2s = kernel_values(init, table, t2)
    if scheme == "exact":
        _, _, g1p, g1s = kernel_values(init, table, state.t)
        _check_phase(g2p, t2)
        _check_phase(g2s, t2)
        pp = g1p / g2p
        ps = g1s / g2s
        mp = mu_step_exact(state.mu_plus, sl.pair, pp, lam)
        mm = mu_step_exact(state.mu_minus, np.conj(sl.pair), pp, lam)
        ms = mu_step_exact(state.mu_sc, sl.sc, ps, lam)
    else:
        mp = mu_step_em(state.mu_plus, state.v_pair, sl.pair, dt, lam)
        mm = mu_step_em(state.mu_minus, state.v_pair, np.conj(sl.pair), dt, lam)
        ms = mu_step_em(state.mu_sc, state.v_sc, sl.sc, dt, lam)
    for arr in (mp, mm, ms, vp2, vs2):
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise NumericalFailure("non-finite kernel value", t=t2)
    return KernelState(t=t2, v_pair=vp2, v_sc=vs2,
                       mu_plus=mp, mu_minus=mm, mu_sc=ms)


# --- full trajectories --------------------------------------------------------

@dataclass(frozen=True)
class DynamicsParams:
    """Time grid and coupling for one run."""

    dt: float
    n_steps: int
    lam: float
    scheme: str = "exact"
    snapshot_stride: int = 1

    def __post_init__(self):
        if self.dt < 0 or self.n_steps < 0:
            raise ConfigError("dt and n_steps must be nonnegative")
        if self.scheme not in ("exact", "euler"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")

    @property
    def t_max(self) -> float:
        return self.n_steps * self.dt

    def snapshot_steps(self) -> np.ndarray:
        steps = list(range(0, self.n_steps + 1, self.snapshot_stride))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return np.asarray(steps, dtype=np.int64)


@dataclass(frozen=True)
class TrajectoryResult:
    """Snapshots of one or more trajectories on a shared time grid.

    Kernel arrays have shape (batch, n_snap, modes); V arrays are noise
    independent and carry no batch axis.
    """

    table: ModeTable
    init: KernelInit
    dyn: DynamicsParams
    times: np.ndarray       # (n_snap,)
    v_pair: np.ndarray      # (n_snap, n_pairs)
    v_sc: np.ndarray        # (n_snap, n_sc)
    mu_plus: np.ndarray     # (batch, n_snap, n_pairs)
    mu_minus: np.ndarray
    mu_sc: np.ndarray       # (batch, n_snap, n_sc)
    noise_pair: np.ndarray | None = None  # (batch, n_steps, n_pairs)
    noise_sc: np.ndarray | None = None

    @property
    def batch(self) -> int:
        return self.mu_plus.shape[0]

    def state_at(self, snap_index: int, b: int = 0) -> KernelState:
        return KernelState(
            t=float(self.times[snap_index]),
            v_pair=self.v_pair[snap_index].copy(),
            v_sc=self.v_sc[snap_index].copy(),
            mu_plus=self.mu_plus[b, snap_index].copy(),
            mu_minus=self.mu_minus[b, snap_index].copy(),
            mu_sc=self.mu_sc[b, snap_index].copy(),
        )


def _phase_grids(init: KernelInit, table: ModeTable, dyn: DynamicsParams):
    """Phase values on the full step grid, with singularity screening.

    g(0) = 0 is tolerated (deterministic kind: the propagator out of the
    initial caustic is an exact zero); any later zero aborts the run.
    """
    t_all = np.arange(dyn.n_steps + 1) * dyn.dt
    _, _, gp, gs = kernel_values(init, table, t_all)
    for g in (gp, gs):
        mag = np.abs(g[1:])
        scale = max(1.0, float(mag.max())) if mag.size else 1.0
        bad = ~np.isfinite(mag) | (mag < _SING_TOL * scale)
        if np.any(bad):
            k = int(np.argwhere(bad.any(axis=1))[0][0]) + 1
            raise KernelSingularError(
                "phase function vanished on the time grid",
                t=float(t_all[k]), step=k)
    return t_all, gp, gs


def run_batch(table: ModeTable, init: KernelInit, dyn: DynamicsParams,
              streams: list[StreamSpec] | None = None,
              noise: tuple[np.ndarray, np.ndarray] | None = None,
              keep_noise: bool = False) -> TrajectoryResult:
    """Evolve a batch of trajectories with shared kernels V.

    Noise comes either from streams (one per trajectory) or from replay
    arrays of shape (batch, n_steps, n_pairs/n_sc).
    """
    if (streams is None) == (noise is None):
        raise ValueError("exactly one of streams/noise must be given")
    n_steps = dyn.n_steps
    if noise is not None:
        dw_p, dw_s = noise
        dw_p = np.ascontiguousarray(dw_p, dtype=np.complex128)
        dw_s = np.ascontiguousarray(dw_s, dtype=np.float64)
        if dw_p.ndim == 2:
            dw_p = dw_p[None]
            dw_s = dw_s[None]
        batch = dw_p.shape[0]
        if dw_p.shape != (batch, n_steps, table.n_pairs) or \
                dw_s.shape != (batch, n_steps, table.n_sc):
            raise ValueError("replay noise shape does not match the run")
    else:
        batch = len(streams)
        dw_p = np.empty((batch, n_steps, table.n_pairs), dtype=np.complex128)
        dw_s = np.empty((batch, n_steps, table.n_sc), dtype=np.float64)
        for b, stream in enumerate(streams):
            dw_p[b], dw_s[b] = sample_block(table, dyn.dt, stream, 0, n_steps)
    if not init.stochastic and dyn.lam != 0.0:
        raise ConfigError(
            "deterministic kernels take no noise; set lambda = 0")

    snap = dyn.snapshot_steps()
    t_all, gp, gs = _phase_grids(init, table, dyn)
    times = t_all[snap]
    vp_all, vs_all, _, _ = kernel_values(init, table, times)

    n_snap = len(snap)
    mup = np.empty((batch, table.n_pairs), dtype=np.complex128)
    mum = np.empty_like(mup)
    mus = np.empty((batch, table.n_sc), dtype=np.complex128)
    mp0, mm0, ms0 = init.mu0_arrays(table)
    mup[:] = mp0
    mum[:] = mm0
    mus[:] = ms0

    out_p = np.empty((batch, n_snap, table.n_pairs), dtype=np.complex128)
    out_m = np.empty_like(out_p)
    out_s = np.empty((batch, n_snap, table.n_sc), dtype=np.complex128)

    if dyn.scheme == "exact":
        prop_p = gp[:-1] / gp[1:]
        prop_s = gs[:-1] / gs[1:]
        _accel.mu_scan_exact(prop_p, prop_s, dw_p, dw_s, dyn.lam,
                             mup, mum, mus, snap, out_p, out_m, out_s)
    else:
        if init.kind in ("zero", "deterministic"):
            raise ConfigError(
                f"{init.kind} kernels require the exact scheme (V is singular)")
        vp_steps, vs_steps, _, _ = kernel_values(init, table, t_all[:-1])
        _accel.mu_scan_euler(vp_steps, vs_steps, dyn.dt, dw_p, dw_s, dyn.lam,
                             mup, mum, mus, snap, out_p, out_m, out_s)

    for name, arr in (("mu", out_p), ("mu", out_m), ("mu", out_s)):
        if arr.size and not np.all(np.isfinite(arr.view(np.float64))):
            k = int(np.argwhere(
                ~np.isfinite(arr.view(np.float64)).all(axis=(0, 2)))[0][0])
            raise NumericalFailure(
                f"non-finite {name} kernel", t=float(times[k]),
                step=int(snap[k]))

    return TrajectoryResult(
        table=table, init=init, dyn=dyn, times=times,
        v_pair=vp_all, v_sc=vs_all,
        mu_plus=out_p, mu_minus=out_m, mu_sc=out_s,
        noise_pair=dw_p if keep_noise else None,
        noise_sc=dw_s if keep_noise else None,
    )


def run_trajectory(table: ModeTable, init: KernelInit, dyn: DynamicsParams,
                   stream: StreamSpec | None = None,
                   noise: tuple[np.ndarray, np.ndarray] | None = None,
                   keep_noise: bool = False) -> TrajectoryResult:
    """Evolve a single trajectory (batch axis of size 1 in the result)."""
    streams = None if stream is None else [stream]
    return run_batch(table, init, dyn, streams=streams, noise=noise,
                     keep_noise=keep_noise)
