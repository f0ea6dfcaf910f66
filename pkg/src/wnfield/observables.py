"""Physical observables of the Gaussian state.

For a paired mode (p, -p) write V = V(p, t), mu+ = mu(p), mu- = mu(-p).
The Gaussian exponent is diagonalized by quadratures x = Re phi(p),
y = Im phi(p); each has variance 1 / (4 kappa Re V) and the center is

    phi_q(p) = <phi(p)> = (conj(mu+) + mu-) / (2 Re V).

A self-conjugate mode has a single real amplitude with variance
1 / (2 kappa Re V) and center Re(mu) / Re V (twice the paired-quadrature
variance: this is what reproduces the vacuum energy E/2 per such mode).

Energy splits into the mu-independent part

    E0 = sum_p (E_p^2 + |V|^2) / (4 Re V)

(equal to sum E_p / 2 in the vacuum and conserved under the Riccati flow
because Re V |f|^2 is a Wronskian invariant) and the noise part

    E1 = Re sum_p [ -(kappa/2) mu(p) mu(-p) + kappa mu(p) V phi_q(p)
                    + (kappa/2) (E_p^2 - V^2) |phi_q(p)|^2 ]

which is exactly real and satisfies E0 + E1 = <H> identically.  The last
term vanishes when V is real (vacuum), recovering the familiar two-term
form.  E[E1] grows linearly at rate lambda^2 N per lattice of N modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConventionViolation, DegenerateKernelError
from .kernel_engine import KernelInit, KernelState, _sine_over_e, phase_fn
from .lattice import DEPENDENT, INDEPENDENT, SELF_CONJUGATE, ModeTable

IM_TOL = 1e-10


def _require_positive_width(vr: np.ndarray) -> None:
    if vr.size and not np.all(vr > 0):
        raise DegenerateKernelError(
            "Re V <= 0: state width is not normalizable")


def _pair_slot(table: ModeTable, mode_id: int):
    """(class, slot index into the pair or sc arrays) for a mode id."""
    kind = int(table.kind[mode_id])
    if kind == SELF_CONJUGATE:
        return kind, int(np.searchsorted(table.sc_ids, mode_id))
    plus = mode_id if kind == INDEPENDENT else int(table.partner[mode_id])
    return kind, int(np.searchsorted(table.pair_plus, plus))


def field_expectation(table: ModeTable, state: KernelState,
                      mode_id: int) -> complex:
    """<phi(p)> for one mode."""
    kind, j = _pair_slot(table, mode_id)
    if kind == SELF_CONJUGATE:
        vr = state.v_sc[j].real
        _require_positive_width(np.asarray([vr]))
        return complex(state.mu_sc[j].real / vr)
    vr = state.v_pair[j].real
    _require_positive_width(np.asarray([vr]))
    val = (np.conj(state.mu_plus[j]) + state.mu_minus[j]) / (2.0 * vr)
    return complex(np.conj(val)) if kind == DEPENDENT else complex(val)


def field_variance(table: ModeTable, state: KernelState,
                   mode_id: int) -> float:
    """Variance per real quadrature of phi(p); the single-quadrature
    variance for self-conjugate modes."""
    kappa = table.spec.quad_weight
    kind, j = _pair_slot(table, mode_id)
    if kind == SELF_CONJUGATE:
        vr = state.v_sc[j].real
        _require_positive_width(np.asarray([vr]))
        return float(1.0 / (2.0 * kappa * vr))
    vr = state.v_pair[j].real
    _require_positive_width(np.asarray([vr]))
    return float(1.0 / (4.0 * kappa * vr))


@dataclass(frozen=True)
class DensityParams:
    """Gaussian parameters of every mode at one instant."""

    center_pair: np.ndarray  # (n_pairs,) complex, <phi(p)> at pair_plus
    center_sc: np.ndarray    # (n_sc,) float
    var_pair: np.ndarray     # (n_pairs,) float, per quadrature
    var_sc: np.ndarray       # (n_sc,) float

    def sample(self, rng: np.random.Generator, n: int,
               table: ModeTable) -> np.ndarray:
        """Draw n field configurations; returns (n, n_modes) amplitudes."""
        out = np.zeros((n, table.n_modes), dtype=np.complex128)
        sd_p = np.sqrt(self.var_pair)
        x = self.center_pair.real + sd_p * rng.standard_normal((n, len(sd_p)))
        y = self.center_pair.imag + sd_p * rng.standard_normal((n, len(sd_p)))
        out[:, table.pair_plus] = x + 1j * y
        out[:, table.pair_minus] = x - 1j * y
        sd_s = np.sqrt(self.var_sc)
        out[:, table.sc_ids] = self.center_sc + sd_s * rng.standard_normal(
            (n, len(sd_s)))
        return out


def density_params(table: ModeTable, state: KernelState) -> DensityParams:
    kappa = table.spec.quad_weight
    vrp = state.v_pair.real
    vrs = state.v_sc.real
    _require_positive_width(vrp)
    _require_positive_width(vrs)
    center_pair = (np.conj(state.mu_plus) + state.mu_minus) / (2.0 * vrp)
    center_sc = state.mu_sc.real / vrs
    return DensityParams(
        center_pair=center_pair,
        center_sc=center_sc,
        var_pair=1.0 / (4.0 * kappa * vrp),
        var_sc=1.0 / (2.0 * kappa * vrs),
    )


def full_expectation(table: ModeTable, state: KernelState) -> np.ndarray:
    """<phi(p)> for every mode id, obeying conjugation symmetry."""
    p = density_params(table, state)
    out = np.zeros(table.n_modes, dtype=np.complex128)
    out[table.pair_plus] = p.center_pair
    out[table.pair_minus] = np.conj(p.center_pair)
    out[table.sc_ids] = p.center_sc
    return out


# --- energies -----------------------------------------------------------------

def _free_pair_sc(table: ModeTable, v_pair, v_sc):
    """Free energy per pair (both partners) and per sc mode."""
    vrp = np.real(v_pair)
    vrs = np.real(v_sc)
    _require_positive_width(vrp)
    _require_positive_width(vrs)
    ep = table.pair_energies
    es = table.sc_energies
    e_pair = 2.0 * (ep * ep + np.abs(v_pair) ** 2) / (4.0 * vrp)
    e_sc = (es * es + np.abs(v_sc) ** 2) / (4.0 * vrs)
    return e_pair, e_sc


def _noise_pair_sc(table: ModeTable, v_pair, v_sc, mu_plus, mu_minus, mu_sc):
    """Complex noise-energy terms per pair and per sc mode.

    Shapes broadcast: V arrays (..., n) against mu arrays (batch, ..., n).
    The result is real up to rounding; callers sum and take the monitored
    real part.
    """
    kappa = table.spec.quad_weight
    ep = table.pair_energies
    es = table.sc_energies
    vrp = np.real(v_pair)
    vrs = np.real(v_sc)
    _require_positive_width(vrp)
    _require_positive_width(vrs)
    phi_p = (np.conj(mu_plus) + mu_minus) / (2.0 * vrp)
    t1 = -kappa * mu_plus * mu_minus
    t2 = kappa * v_pair * (mu_plus * phi_p + mu_minus * np.conj(phi_p))
    t3 = kappa * (ep * ep - v_pair * v_pair) * (phi_p * np.conj(phi_p))
    e_pair = t1 + t2 + t3

    phi_s = np.real(mu_sc) / vrs
    s1 = -(kappa / 2.0) * mu_sc * mu_sc
    s2 = kappa * v_sc * mu_sc * phi_s
    s3 = (kappa / 2.0) * (es * es - v_sc * v_sc) * (phi_s * phi_s)
    e_sc = s1 + s2 + s3
    return e_pair, e_sc


def _monitored_real(z, what: str):
    z = np.asarray(z)
    scale = np.maximum(1.0, np.abs(z.real))
    if z.size and np.max(np.abs(z.imag) / scale) > IM_TOL:
        raise ConventionViolation(
            f"{what} came out complex: max Im = {np.max(np.abs(z.imag)):.3e}")
    return z.real


def energy_free(table: ModeTable, state: KernelState) -> float:
    """E0 at the state's current V; constant along the Riccati flow."""
    e_pair, e_sc = _free_pair_sc(table, state.v_pair, state.v_sc)
    return float(np.sum(e_pair) + np.sum(e_sc))


def energy_noise(table: ModeTable, state: KernelState) -> float:
    """E1, the mu-dependent part of <H>.  Exactly real by construction."""
    e_pair, e_sc = _noise_pair_sc(
        table, state.v_pair, state.v_sc,
        state.mu_plus, state.mu_minus, state.mu_sc)
    total = np.sum(e_pair) + np.sum(e_sc)
    return float(_monitored_real(total, "noise energy"))


def total_energy(table: ModeTable, state: KernelState) -> float:
    return energy_free(table, state) + energy_noise(table, state)


def energy_series(table: ModeTable, v_pair, v_sc, mu_plus, mu_minus, mu_sc):
    """Batched energies from snapshot arrays.

    v arrays: (n_snap, n); mu arrays: (batch, n_snap, n).  Returns a dict
    with e0 (n_snap,), e1/e_total (batch, n_snap), and per-mode energies
    pair_energy (batch, n_snap, n_pairs), sc_energy (batch, n_snap, n_sc)
    that include the free part.
    """
    f_pair, f_sc = _free_pair_sc(table, v_pair, v_sc)
    e0 = f_pair.sum(axis=-1) + f_sc.sum(axis=-1)
    n_pair, n_sc = _noise_pair_sc(
        table, v_pair[None], v_sc[None], mu_plus, mu_minus, mu_sc)
    e1 = _monitored_real(
        n_pair.sum(axis=-1) + n_sc.sum(axis=-1), "noise energy")
    pair_energy = f_pair[None] + _monitored_real(n_pair, "pair noise energy")
    sc_energy = f_sc[None] + _monitored_real(n_sc, "sc noise energy")
    return {
        "e0": e0,
        "e1": e1,
        "e_total": e0[None, :] + e1,
        "pair_energy": pair_energy,
        "sc_energy": sc_energy,
    }


# --- ensemble-mean correlators (closed-form quadratures) -----------------------

def _scalar_phase(init: KernelInit, table: ModeTable, kind: int, slot: int):
    """Return g(t) for one mode as a scalar-callable."""
    e = float(table.sc_energies[slot] if kind == SELF_CONJUGATE
              else table.pair_energies[slot])
    if init.kind == "deterministic":
        return e, lambda t: complex(_sine_over_e(e, t))
    v0p, v0s = init.v0_arrays(table)
    v0 = complex(v0s[slot] if kind == SELF_CONJUGATE else v0p[slot])
    return e, lambda t: complex(phase_fn(v0, e, t))


def ensemble_mu_correlators(init: KernelInit, table: ModeTable, mode_id: int,
                            lam: float, t: float) -> tuple[complex, float]:
    """Exact ensemble means (E[mu(p) mu(-p)], E[|mu(p)|^2]) at time t.

    From the Ito solution mu(t) = mu(0) g(0)/g(t) + i lam int dW g(s)/g(t)
    with E|dW|^2 = dt/kappa per slice,

        E[mu mu_-] = mu+(0) mu-(0) (g(0)/g(t))^2
                     - (lam^2/kappa) int_0^t (g(s)/g(t))^2 ds
        E[|mu|^2]  = |mu(0) g(0)/g(t)|^2
                     + (lam^2/kappa) int_0^t |g(s)/g(t)|^2 ds

    evaluated by adaptive quadrature.  In the vacuum the second reduces
    to lam^2 t Omega / (2 pi)^(2 dim) exactly.
    """
    kappa = table.spec.quad_weight
    kind, slot = _pair_slot(table, mode_id)
    _, g = _scalar_phase(init, table, kind, slot)
    gt = g(t)
    if abs(gt) < 1e-12:
        raise DegenerateKernelError(f"phase function vanishes at t={t}")

    mp0, mm0, ms0 = init.mu0_arrays(table)
    if kind == SELF_CONJUGATE:
        m0p = m0m = complex(ms0[slot])
    elif kind == DEPENDENT:
        # the mode's own amplitude is mu(-p); the product is symmetric
        m0p, m0m = complex(mm0[slot]), complex(mp0[slot])
    else:
        m0p, m0m = complex(mp0[slot]), complex(mm0[slot])
    ratio0 = g(0.0) / gt

    if t == 0.0:
        return m0p * m0m, float(abs(m0p) ** 2)

    def sq_re(s):
        return ((g(s) / gt) ** 2).real

    def sq_im(s):
        return ((g(s) / gt) ** 2).imag

    def absq(s):
        return abs(g(s) / gt) ** 2

    opts = dict(limit=200, epsabs=1e-12, epsrel=1e-11)
    i_re = integrate.quad(sq_re, 0.0, t, **opts)[0]
    i_im = integrate.quad(sq_im, 0.0, t, **opts)[0]
    i_abs = integrate.quad(absq, 0.0, t, **opts)[0]

    prod = m0p * m0m * ratio0 ** 2 - (lam ** 2 / kappa) * (i_re + 1j * i_im)
    abs2 = abs(m0p * ratio0) ** 2 + (lam ** 2 / kappa) * i_abs
    return prod, float(abs2)
