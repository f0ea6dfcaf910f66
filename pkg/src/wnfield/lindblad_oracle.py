"""Single-mode Lindblad master equation driven by position-coupled noise.

Expanding the position-space white-noise dissipator in momentum modes
reduces it, mode by mode, to a harmonic oscillator with

    d rho/dt = -i [H, rho]
               + lam^2 ( x rho x - (1/2) { x^2, rho } )

where H = diag(n E) (zero point dropped) and x = (a + a†) / sqrt(2E),
i.e. matrix elements x[n, n+1] = sqrt((n+1) / (2E)).  The double
commutator identity gives

    d<H>/dt = -(lam^2 / 2) tr( rho [x, [x, H]] ) = lam^2 / 2

exactly, independent of the state and of E: the same heating rate per
mode as the Gaussian unraveling.  Because H omits the zero point, the
wave-functional mode energy corresponds to <H> + E/2.

Integration is fixed-step RK4 on the dense density matrix with trace,
hermiticity, positivity, and truncation monitors.  The generator
preserves parity, so <x> stays exactly zero from the vacuum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalFailure, TruncationError

TOP_POPULATION_LIMIT = 1e-8


@dataclass(frozen=True)
class SingleModeGenerator:
    """Precomputed matrices for one oscillator mode."""

    e: float
    lam: float
    n_max: int
    h: np.ndarray        # (n_max + 1,) diagonal of H
    x: np.ndarray        # (n_max + 1, n_max + 1)
    x_sq: np.ndarray
    hdiff: np.ndarray    # -i (h_m - h_n), the commutator phase matrix

    @property
    def dim(self) -> int:
        return self.n_max + 1


def build_generator(e: float, lam: float, n_max: int = 60
                    ) -> SingleModeGenerator:
    if e <= 0:
        raise ConfigError("oscillator mode needs E > 0")
    if n_max < 2:
        raise ConfigError("n_max must be >= 2")
    n = np.arange(n_max + 1, dtype=float)
    h = n * e
    x = np.zeros((n_max + 1, n_max + 1))
    off = np.sqrt((n[:-1] + 1.0) / (2.0 * e))
    x[np.arange(n_max), np.arange(1, n_max + 1)] = off
    x[np.arange(1, n_max + 1), np.arange(n_max)] = off
    hdiff = -1j * (h[:, None] - h[None, :])
    return SingleModeGenerator(e=e, lam=lam, n_max=n_max, h=h, x=x,
                               x_sq=x @ x, hdiff=hdiff)


def vacuum_rho(n_max: int) -> np.ndarray:
    rho = np.zeros((n_max + 1, n_max + 1), dtype=np.complex128)
    rho[0, 0] = 1.0
    return rho


def lindblad_rhs(rho: np.ndarray, gen: SingleModeGenerator) -> np.ndarray:
    """Generator action: -i[H, rho] + lam^2 D[x] rho."""
    l2 = gen.lam ** 2
    return gen.hdiff * rho + l2 * (
        gen.x @ rho @ gen.x - 0.5 * (gen.x_sq @ rho + rho @ gen.x_sq))


@dataclass(frozen=True)
class LindbladSeries:
    """Diagnostics along one integration."""

    gen: SingleModeGenerator
    t: np.ndarray
    energy: np.ndarray     # tr(rho H), zero point excluded
    x_mean: np.ndarray
    x2_mean: np.ndarray
    trace_err: np.ndarray  # tr(rho) - 1
    min_eig: np.ndarray
    rho_final: np.ndarray


def _spectral_rate(gen: SingleModeGenerator) -> float:
    # fastest coherence rotation plus dissipative width
    return gen.n_max * gen.e + gen.lam ** 2 * float(np.max(np.diag(gen.x_sq)))


def default_step(gen: SingleModeGenerator) -> float:
    """Step keeping RK4 well inside its stability region."""
    return 1.0 / _spectral_rate(gen)


def _rk4_span(rho: np.ndarray, gen: SingleModeGenerator,
              span: float, n_sub: int) -> np.ndarray:
    dt = span / n_sub
    for _ in range(n_sub):
        k1 = lindblad_rhs(rho, gen)
        k2 = lindblad_rhs(rho + (0.5 * dt) * k1, gen)
        k3 = lindblad_rhs(rho + (0.5 * dt) * k2, gen)
        k4 = lindblad_rhs(rho + dt * k3, gen)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rho


def _probe(rho, gen, t, herm_tol=1e-9, pos_tol=1e-8):
    if not np.all(np.isfinite(rho.view(np.float64))):
        raise NumericalFailure("non-finite density matrix", t=t)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > herm_tol:
        raise NumericalFailure(
            f"density matrix lost hermiticity ({herm:.2e})", t=t)
    top = float(rho[-1, -1].real)
    if top > TOP_POPULATION_LIMIT:
        raise TruncationError(
            f"population {top:.2e} reached the Fock cutoff at t={t:.4g}",
            top_population=top)
    eigs = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if eigs[0] < -pos_tol:
        raise NumericalFailure(
            f"density matrix lost positivity (min eig {eigs[0]:.2e})", t=t)
    return {
        "energy": float(np.sum(gen.h * np.diag(rho).real)),
        "x_mean": float(np.trace(gen.x @ rho).real),
        "x2_mean": float(np.trace(gen.x_sq @ rho).real),
        "trace_err": float(np.trace(rho).real - 1.0),
        "min_eig": float(eigs[0]),
    }


def integrate_at(rho0: np.ndarray, gen: SingleModeGenerator,
                 times: np.ndarray, dt_target: float | None = None
                 ) -> LindbladSeries:
    """RK4 integration landing exactly on the given time grid."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1 or times[0] != 0.0:
        raise ValueError("times must start at 0")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if dt_target is None:
        dt_target = default_step(gen)
    if dt_target * _spectral_rate(gen) > 2.5:
        warnings.warn(
            "RK4 step too large for n_max * E: integration may be unstable",
            RuntimeWarning, stacklevel=2)
    rho = np.array(rho0, dtype=np.complex128)
    if rho.shape != (gen.dim, gen.dim):
        raise ValueError("rho0 does not match the generator dimension")
    rows = [_probe(rho, gen, 0.0)]
    for t_a, t_b in zip(times[:-1], times[1:]):
        n_sub = max(1, int(np.ceil((t_b - t_a) / dt_target)))
        rho = _rk4_span(rho, gen, t_b - t_a, n_sub)
        rows.append(_probe(rho, gen, float(t_b)))
    return LindbladSeries(
        gen=gen,
        t=times.copy(),
        energy=np.array([r["energy"] for r in rows]),
        x_mean=np.array([r["x_mean"] for r in rows]),
        x2_mean=np.array([r["x2_mean"] for r in rows]),
        trace_err=np.array([r["trace_err"] for r in rows]),
        min_eig=np.array([r["min_eig"] for r in rows]),
        rho_final=rho,
    )


def integrate(rho0: np.ndarray, gen: SingleModeGenerator, dt: float,
              t_max: float, stride: int = 1) -> LindbladSeries:
    """Fixed-step RK4 from t = 0 to t_max, recording every stride steps."""
    if dt <= 0 or t_max < 0:
        raise ValueError("dt must be positive and t_max nonnegative")
    n_steps = max(1, int(round(t_max / dt))) if t_max > 0 else 0
    steps = list(range(0, n_steps + 1, max(1, stride)))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    times = np.array(steps, dtype=float) * (t_max / n_steps if n_steps else dt)
    return integrate_at(rho0, gen, times, dt_target=dt)


def run_single_mode(e: float, lam: float, t_max: float,
                    times: np.ndarray | None = None, n_max: int = 60,
                    stride: int = 1, max_doublings: int = 4
                    ) -> LindbladSeries:
    """Integrate from the vacuum, doubling n_max on truncation overflow."""
    attempt = n_max
    for _ in range(max_doublings + 1):
        gen = build_generator(e, lam, attempt)
        try:
            if times is not None:
                return integrate_at(vacuum_rho(attempt), gen, times)
            return integrate(vacuum_rho(attempt), gen,
                             default_step(gen), t_max, stride=stride)
        except TruncationError:
            attempt *= 2
    raise TruncationError(
        f"population still reaches the cutoff at n_max={attempt // 2}")


# --- consistency with the Gaussian unraveling ----------------------------------

@dataclass(frozen=True)
class ConsistencyReport:
    """Ensemble mean mode energy against the master equation."""

    mode_id: int
    e: float
    times: np.ndarray
    wave_energy: np.ndarray      # ensemble mean, includes zero point E/2
    wave_energy_se: np.ndarray
    lindblad_energy: np.ndarray  # tr(rho H) + E/2
    x_wave: np.ndarray           # sqrt(kappa) <phi(p)>, ensemble mean
    x_wave_se: np.ndarray
    x_lindblad: np.ndarray
    max_z: float
    passed: bool


def unraveling_consistency(table, init, dyn, mode_id: int,
                           n_traj: int, master_seed: int,
                           n_max: int = 60, z_max: float = 3.0,
                           workers: int | None = None) -> ConsistencyReport:
    """Compare the stochastic wave-functional ensemble with the master
    equation for one self-conjugate mode.

    The wave side reports the mode energy (vacuum value E/2) and
    sqrt(kappa) <phi(p)>; the Lindblad side gets the zero point added.
    Agreement criterion: |difference| <= z_max * SE at every shared time
    (absolute guard 1e-12 where the SE vanishes, e.g. at t = 0).
    """
    from .ensemble import run_ensemble

    from .lattice import SELF_CONJUGATE

    if int(table.kind[mode_id]) != SELF_CONJUGATE:
        raise ConfigError("unraveling comparison needs a self-conjugate mode")
    e = float(table.energies[mode_id])
    if e <= 0:
        raise ConfigError("unraveling comparison needs a mode with E > 0")

    stats = run_ensemble(table, init, dyn, n_traj, master_seed,
                         workers=workers)
    w_mean, w_se = stats.series(f"sc_energy[{mode_id}]")
    p_mean, p_se = stats.series(f"sc_phi[{mode_id}]")

    series = run_single_mode(e, dyn.lam, dyn.t_max,
                             times=stats.times, n_max=n_max)
    lind = series.energy + 0.5 * e

    sqrt_k = np.sqrt(table.spec.quad_weight)
    x_wave = sqrt_k * p_mean
    x_wave_se = sqrt_k * p_se

    z_e = np.abs(w_mean - lind) / np.maximum(w_se, 1e-12)
    z_x = np.abs(x_wave - series.x_mean) / np.maximum(x_wave_se, 1e-12)
    guard_e = np.abs(w_mean - lind) <= 1e-12
    guard_x = np.abs(x_wave - series.x_mean) <= 1e-12
    ok = np.all((z_e <= z_max) | guard_e) and np.all((z_x <= z_max) | guard_x)
    zs = np.concatenate([z_e[~guard_e], z_x[~guard_x]])
    max_z = float(zs.max()) if zs.size else 0.0

    return ConsistencyReport(
        mode_id=mode_id, e=e, times=stats.times,
        wave_energy=w_mean, wave_energy_se=w_se,
        lindblad_energy=lind, x_wave=x_wave, x_wave_se=x_wave_se,
        x_lindblad=series.x_mean, max_z=max_z, passed=bool(ok))
