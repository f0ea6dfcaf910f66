"""Classical stochastic Klein-Gordon field driven by the same noise.

Mode by mode the classical equations are

    d phi(p) = pi(p) dt
    d pi(p)  = -E_p^2 phi(p) dt + lambda dW(-p)

(dW(-p) = conj(dW(p))).  The exact one-step map applies the noise kick
and then rotates through a free oscillation:

    pi  -> pi + lambda conj(dW)
    phi -> cos(E dt) phi + (sin(E dt)/E) pi
    pi  -> cos(E dt) pi - E sin(E dt) phi

with sin(E dt)/E continued to dt at E = 0.  Ehrenfest correspondence:
started from rest with any finite-V0 Gaussian kernel, the quantum center
<phi(p)>(t) equals the classical solution driven by the same noise
realization, exactly on the shared time grid (not just up to O(dt)).

The classical energy (kappa/2) sum_p |pi|^2 + E^2 |phi|^2 heats at the
same mean rate lambda^2/2 per mode as the quantum state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import ConfigError, NumericalFailure
from .kernel_engine import (DynamicsParams, KernelInit, TrajectoryResult,
                            _sine_over_e, run_batch)
from .lattice import ModeTable
from .noise import NoiseSlice, StreamSpec, sample_block


@dataclass(frozen=True)
class ClassicalState:
    """Classical mode amplitudes; sc entries are real-valued."""

    t: float
    phi_pair: np.ndarray  # (n_pairs,) complex
    pi_pair: np.ndarray
    phi_sc: np.ndarray    # (n_sc,) float
    pi_sc: np.ndarray


def rest_state(table: ModeTable) -> ClassicalState:
    return ClassicalState(
        t=0.0,
        phi_pair=np.zeros(table.n_pairs, dtype=np.complex128),
        pi_pair=np.zeros(table.n_pairs, dtype=np.complex128),
        phi_sc=np.zeros(table.n_sc),
        pi_sc=np.zeros(table.n_sc),
    )


def classical_step_exact(state: ClassicalState, sl: NoiseSlice,
                         table: ModeTable, lam: float) -> ClassicalState:
    """Kick by the noise, then rotate through one free period."""
    dt = sl.dt
    ep = table.pair_energies
    es = table.sc_energies
    c_p, s_p = np.cos(ep * dt), _sine_over_e(ep, dt)
    c_s, s_s = np.cos(es * dt), _sine_over_e(es, dt)
    pp = state.pi_pair + lam * np.conj(sl.pair)
    ps = state.pi_sc + lam * sl.sc
    return ClassicalState(
        t=state.t + dt,
        phi_pair=c_p * state.phi_pair + s_p * pp,
        pi_pair=c_p * pp - ep * np.sin(ep * dt) * state.phi_pair,
        phi_sc=c_s * state.phi_sc + s_s * ps,
        pi_sc=c_s * ps - es * np.sin(es * dt) * state.phi_sc,
    )


def classical_step_em(state: ClassicalState, sl: NoiseSlice,
                      table: ModeTable, lam: float) -> ClassicalState:
    """Euler-Maruyama: phi += pi dt; pi += -E^2 phi dt + lambda conj(dW)."""
    dt = sl.dt
    ep2 = table.pair_energies ** 2
    es2 = table.sc_energies ** 2
    return ClassicalState(
        t=state.t + dt,
        phi_pair=state.phi_pair + dt * state.pi_pair,
        pi_pair=state.pi_pair - dt * ep2 * state.phi_pair
        + lam * np.conj(sl.pair),
        phi_sc=state.phi_sc + dt * state.pi_sc,
        pi_sc=state.pi_sc - dt * es2 * state.phi_sc + lam * sl.sc,
    )


@dataclass(frozen=True)
class ClassicalTrajectory:
    table: ModeTable
    dyn: DynamicsParams
    times: np.ndarray     # (n_snap,)
    phi_pair: np.ndarray  # (batch, n_snap, n_pairs) complex
    pi_pair: np.ndarray
    phi_sc: np.ndarray    # (batch, n_snap, n_sc) float
    pi_sc: np.ndarray

    @property
    def batch(self) -> int:
        return self.phi_pair.shape[0]


def run_classical(table: ModeTable, dyn: DynamicsParams,
                  streams: list[StreamSpec] | None = None,
                  noise: tuple[np.ndarray, np.ndarray] | None = None,
                  start: ClassicalState | None = None) -> ClassicalTrajectory:
    """Evolve classical trajectories from rest (or a given start)."""
    if (streams is None) == (noise is None):
        raise ValueError("exactly one of streams/noise must be given")
    n_steps = dyn.n_steps
    if noise is not None:
        dw_p, dw_s = noise
        dw_p = np.ascontiguousarray(dw_p, dtype=np.complex128)
        dw_s = np.ascontiguousarray(dw_s, dtype=np.float64)
        if dw_p.ndim == 2:
            dw_p, dw_s = dw_p[None], dw_s[None]
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

    if start is None:
        start = rest_state(table)
    php = np.tile(start.phi_pair, (batch, 1)).astype(np.complex128)
    pip_ = np.tile(start.pi_pair, (batch, 1)).astype(np.complex128)
    phs = np.tile(start.phi_sc, (batch, 1)).astype(np.float64)
    pis = np.tile(start.pi_sc, (batch, 1)).astype(np.float64)

    snap = dyn.snapshot_steps()
    n_snap = len(snap)
    out_php = np.empty((batch, n_snap, table.n_pairs), dtype=np.complex128)
    out_pip = np.empty_like(out_php)
    out_phs = np.empty((batch, n_snap, table.n_sc), dtype=np.float64)
    out_pis = np.empty_like(out_phs)

    ep = table.pair_energies
    es = table.sc_energies
    dt = dyn.dt
    if dyn.scheme == "exact":
        _accel.classical_scan_exact(
            np.cos(ep * dt), _sine_over_e(ep, dt), ep * np.sin(ep * dt),
            np.cos(es * dt), _sine_over_e(es, dt), es * np.sin(es * dt),
            dw_p, dw_s, dyn.lam, php, pip_, phs, pis, snap,
            out_php, out_pip, out_phs, out_pis)
    elif dyn.scheme == "euler":
        _accel.classical_scan_euler(
            ep * ep, es * es, dt, dw_p, dw_s, dyn.lam,
            php, pip_, phs, pis, snap,
            out_php, out_pip, out_phs, out_pis)
    else:
        raise ConfigError(f"unknown scheme {dyn.scheme!r}")

    for arr in (out_php, out_pip):
        if arr.size and not np.all(np.isfinite(arr.view(np.float64))):
            raise NumericalFailure("non-finite classical amplitude")
    for arr in (out_phs, out_pis):
        if arr.size and not np.all(np.isfinite(arr)):
            raise NumericalFailure("non-finite classical amplitude")

    return ClassicalTrajectory(
        table=table, dyn=dyn, times=np.arange(n_steps + 1)[snap] * dt,
        phi_pair=out_php, pi_pair=out_pip, phi_sc=out_phs, pi_sc=out_pis)


def classical_energy(table: ModeTable, phi_pair, pi_pair, phi_sc, pi_sc):
    """H_cl = (kappa/2) sum_p (|pi(p)|^2 + E_p^2 |phi(p)|^2).

    Accepts trailing-mode-axis arrays; pairs count twice (p and -p).
    """
    kappa = table.spec.quad_weight
    ep2 = table.pair_energies ** 2
    es2 = table.sc_energies ** 2
    pair = np.abs(pi_pair) ** 2 + ep2 * np.abs(phi_pair) ** 2
    sc = np.asarray(pi_sc) ** 2 + es2 * np.asarray(phi_sc) ** 2
    return kappa * pair.sum(axis=-1) + (kappa / 2.0) * sc.sum(axis=-1)


@dataclass(frozen=True)
class EhrenfestReport:
    """Max deviation between <phi(p)>(t) and the classical solution."""

    max_abs: float
    max_rel: float
    scale: float
    t_at: float
    mode_slot: int
    times: np.ndarray


def ehrenfest_compare(table: ModeTable, init: KernelInit,
                      dyn: DynamicsParams, stream: StreamSpec,
                      quantum: TrajectoryResult | None = None,
                      classical: ClassicalTrajectory | None = None
                      ) -> EhrenfestReport:
    """Drive quantum and classical systems with one noise realization.

    The quantum state must start centered (mu0 = 0) so the classical
    partner starts from rest.  Returns the worst absolute and relative
    discrepancy of the field expectation over all snapshots and modes.
    """
    mp0, mm0, ms0 = init.mu0_arrays(table)
    if np.any(mp0 != 0) or np.any(mm0 != 0) or np.any(ms0 != 0):
        raise ConfigError("ehrenfest comparison requires mu0 = 0")
    if quantum is None:
        quantum = run_batch(table, init, dyn, streams=[stream],
                            keep_noise=True)
    if classical is None:
        classical = run_classical(
            table, dyn, noise=(quantum.noise_pair, quantum.noise_sc))
    if quantum.times.shape != classical.times.shape or \
            not np.array_equal(quantum.times, classical.times):
        raise ValueError("quantum and classical runs use different grids")

    vrp = quantum.v_pair.real
    vrs = quantum.v_sc.real
    phi_q_pair = (np.conj(quantum.mu_plus) + quantum.mu_minus) / (2.0 * vrp)
    phi_q_sc = quantum.mu_sc.real / vrs

    diff = 0.0
    scale = 0.0
    t_at = 0.0
    slot = -1
    for q, c in ((phi_q_pair, classical.phi_pair),
                 (phi_q_sc, classical.phi_sc)):
        if q.size == 0:
            continue
        d = np.abs(q - c)
        scale = max(scale, float(np.max(np.abs(c))))
        i = np.unravel_index(np.argmax(d), d.shape)
        if d[i] >= diff:
            diff = float(d[i])
            t_at = float(quantum.times[i[1]])
            slot = int(i[2])
    rel = diff / scale if scale > 0 else diff
    return EhrenfestReport(max_abs=diff, max_rel=rel, scale=scale,
                           t_at=t_at, mode_slot=slot, times=quantum.times)