"""Field moments and energies against an independent quadrature oracle.

The oracle integrates the Gaussian wave functional directly: each mode
reduces to a 1-D wavefunction psi(u) = exp(-(V/2) u^2 + m u) whose
energy <-(1/2) d^2/du^2 + (E^2/2) u^2> is evaluated by Gauss-Hermite
quadrature (the integrand is a degree-2 polynomial times a Gaussian, so
the quadrature is exact).  A mode pair (p, -p) splits into two such
oscillators in the scaled quadratures X, Y; a self-conjugate mode is one
oscillator.  The frozen literals below were produced by this oracle and
are also recomputed live, guarding both transcription and drift.
"""

import numpy as np
import pytest

from wnfield import (ConventionViolation, DegenerateKernelError,
                     DynamicsParams, KernelInit, KernelState, LatticeSpec,
                     StreamSpec, build_mode_table, density_params,
                     energy_free, energy_noise, energy_series,
                     ensemble_mu_correlators, field_expectation,
                     field_variance, full_expectation, initial_state,
                     phase_fn, run_batch, run_trajectory, total_energy)

SEED = 20260817
TWO_PI = 2.0 * np.pi


# --- the quadrature oracle --------------------------------------------------------

def oscillator_energy(v, e, m, n=96):
    """<H> of psi(u) = exp(-(v/2) u^2 + m u) with H = -d^2/du^2 / 2
    + e^2 u^2 / 2, by Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite.hermgauss(n)
    vr = v.real
    assert vr > 0
    u = x / np.sqrt(vr) + m.real / vr
    a = -0.5 * ((-v * u + m) ** 2 - v) + 0.5 * e * e * u * u
    val = np.sum(w * a) / np.sum(w)
    assert abs(val.imag) < 1e-12 * max(1.0, abs(val.real))
    return val.real


def oracle_total_energy(table, v_pair, v_sc, mu_plus, mu_minus, mu_sc):
    kappa = table.spec.quad_weight
    total = 0.0
    for j, e in enumerate(table.pair_energies):
        m_x = np.sqrt(kappa / 2.0) * (mu_plus[j] + mu_minus[j])
        m_y = 1j * np.sqrt(kappa / 2.0) * (mu_plus[j] - mu_minus[j])
        total += oscillator_energy(v_pair[j], e, m_x)
        total += oscillator_energy(v_pair[j], e, m_y)
    for j, e in enumerate(table.sc_energies):
        total += oscillator_energy(v_sc[j], e, np.sqrt(kappa) * mu_sc[j])
    return total


# shared test state on the 4-site lattice (ids: pair 2/-0, sc 1 and 3)
V_PAIR = np.array([1.7 - 0.9j])
V_SC = np.array([0.8 + 0.3j, 2.6 - 1.1j])
MU_PLUS = np.array([0.35 + 0.2j])
MU_MINUS = np.array([-0.15 + 0.45j])
MU_SC = np.array([0.25 - 0.6j, -0.4 + 0.15j])

# frozen oracle outputs for that state (96-node Gauss-Hermite)
GH_TOTAL = 11.288408415963795
GH_FREE = 4.4601845703205925
GH_VACUUM_TOTAL = 8.908341227896988


def make_state(v_pair=V_PAIR, v_sc=V_SC):
    return KernelState(t=0.0, v_pair=v_pair, v_sc=v_sc,
                       mu_plus=MU_PLUS, mu_minus=MU_MINUS, mu_sc=MU_SC)


def test_total_energy_matches_frozen_oracle(table4):
    st = make_state()
    assert total_energy(table4, st) == pytest.approx(GH_TOTAL, rel=1e-12)
    assert energy_free(table4, st) == pytest.approx(GH_FREE, rel=1e-12)
    assert energy_noise(table4, st) == pytest.approx(GH_TOTAL - GH_FREE,
                                                     rel=1e-12)


def test_oracle_literals_are_reproducible(table4):
    live = oracle_total_energy(table4, V_PAIR, V_SC, MU_PLUS, MU_MINUS, MU_SC)
    assert live == pytest.approx(GH_TOTAL, rel=1e-13)
    z = np.zeros(1, complex)
    z2 = np.zeros(2, complex)
    assert oracle_total_energy(table4, V_PAIR, V_SC, z, z, z2) == \
        pytest.approx(GH_FREE, rel=1e-13)


def test_total_energy_vacuum_v_with_offsets(table4):
    st = make_state(v_pair=table4.pair_energies.astype(complex),
                    v_sc=table4.sc_energies.astype(complex))
    assert total_energy(table4, st) == pytest.approx(GH_VACUUM_TOTAL,
                                                     rel=1e-12)


# --- field expectation and variance -----------------------------------------------

def test_field_expectation_trivials(table4):
    zero = initial_state(table4, KernelInit(kind="vacuum"))
    for mid in range(table4.n_modes):
        assert field_expectation(table4, zero, mid) == 0.0

    # mu+ = mu- = 1 real, V = 2 real -> (1+1)/4 = 0.5
    st = KernelState(t=0.0,
                     v_pair=np.array([2.0 + 0j]),
                     v_sc=np.array([2.0 + 0j, 2.0 + 0j]),
                     mu_plus=np.array([1.0 + 0j]),
                     mu_minus=np.array([1.0 + 0j]),
                     mu_sc=np.array([1.0 + 0j, 1.0 + 0j]))
    plus_id = int(table4.pair_plus[0])
    assert field_expectation(table4, st, plus_id) == 0.5
    # self-conjugate: Re mu / Re V
    assert field_expectation(table4, st, int(table4.sc_ids[0])) == 0.5


def test_field_expectation_conjugation(table4):
    st = make_state()
    plus_id = int(table4.pair_plus[0])
    minus_id = int(table4.pair_minus[0])
    v_plus = field_expectation(table4, st, plus_id)
    v_minus = field_expectation(table4, st, minus_id)
    assert v_minus == np.conj(v_plus)

    full = full_expectation(table4, st)
    np.testing.assert_array_equal(full[table4.partner], np.conj(full))


def test_one_noise_step_center_hand_expansion(table4):
    """After one vacuum step: phi_q = ((i lam prop dW)* + i lam prop dW*)
    / (2 E), expanded by hand."""
    init = KernelInit(kind="vacuum")
    dt, lam = 0.04, 0.5
    dyn = DynamicsParams(dt=dt, n_steps=1, lam=lam, snapshot_stride=1)
    res = run_trajectory(table4, init, dyn, stream=StreamSpec(SEED, 20),
                         keep_noise=True)
    st = res.state_at(1)
    e = table4.pair_energies[0]
    prop = phase_fn(e + 0j, e, 0.0) / phase_fn(e + 0j, e, dt)
    w = res.noise_pair[0, 0, 0]
    mu_p = 1j * lam * prop * w
    mu_m = 1j * lam * prop * np.conj(w)
    expected = (np.conj(mu_p) + mu_m) / (2.0 * e)
    assert field_expectation(table4, st, int(table4.pair_plus[0])) == \
        pytest.approx(expected, rel=1e-12)


def test_field_variance_formula(table4):
    spec = table4.spec
    st = initial_state(table4, KernelInit(kind="vacuum"))
    plus_id = int(table4.pair_plus[0])
    e = table4.pair_energies[0]
    # vacuum: Omega / (4 (2 pi)^(2 dim) E) per quadrature
    assert field_variance(table4, st, plus_id) == pytest.approx(
        spec.volume / (4.0 * TWO_PI ** (2 * spec.dim) * e), rel=1e-14)
    sc_id = int(table4.sc_ids[0])
    es = table4.energies[sc_id]
    assert field_variance(table4, st, sc_id) == pytest.approx(
        spec.volume / (2.0 * TWO_PI ** (2 * spec.dim) * es), rel=1e-14)


def test_variance_noise_independent_along_trajectory(table4):
    """V(t) is deterministic, so the variance at fixed t is the same for
    any noise realization."""
    init = KernelInit(kind="scaled", scale=1.1 - 0.2j)
    dyn = DynamicsParams(dt=0.02, n_steps=30, lam=0.5, snapshot_stride=10)
    a = run_trajectory(table4, init, dyn, stream=StreamSpec(SEED, 21))
    b = run_trajectory(table4, init, dyn, stream=StreamSpec(SEED, 22))
    for k in range(len(a.times)):
        va = field_variance(table4, a.state_at(k), int(table4.pair_plus[0]))
        vb = field_variance(table4, b.state_at(k), int(table4.pair_plus[0]))
        assert va == vb


def test_variance_monte_carlo(table4):
    """Sampling field configurations reproduces the variance to 5 sigma
    with 1e5 samples (direct Gaussian sampling oracle)."""
    st = make_state()
    params = density_params(table4, st)
    rng = np.random.default_rng([SEED, 23])
    n = 100_000
    samples = params.sample(rng, n, table4)
    band = 5.0 * np.sqrt(2.0 / (n - 1))

    j = int(table4.pair_plus[0])
    for comp in (samples[:, j].real, samples[:, j].imag):
        assert comp.var(ddof=1) / params.var_pair[0] == pytest.approx(
            1.0, abs=band)
    sc = int(table4.sc_ids[0])
    assert samples[:, sc].real.var(ddof=1) / params.var_sc[0] == \
        pytest.approx(1.0, abs=band)
    # samples respect conjugation symmetry structurally
    np.testing.assert_array_equal(samples[:, table4.pair_minus[0]],
                                  np.conj(samples[:, j]))
    # and their mean approaches the center
    se = np.sqrt(params.var_pair[0] / n)
    assert abs(samples[:, j].mean() - params.center_pair[0]) < 5.0 * \
        np.sqrt(2.0) * se


def test_degenerate_width_rejected(table4):
    st = make_state(v_pair=np.array([-0.1 + 0.4j]))
    with pytest.raises(DegenerateKernelError):
        field_expectation(table4, st, int(table4.pair_plus[0]))
    with pytest.raises(DegenerateKernelError):
        field_variance(table4, st, int(table4.pair_plus[0]))
    with pytest.raises(DegenerateKernelError):
        total_energy(table4, st)
    with pytest.raises(DegenerateKernelError):
        density_params(table4, st)


# --- energy split -------------------------------------------------------------------

def test_vacuum_energy_is_half_sum(table8):
    st = initial_state(table8, KernelInit(kind="vacuum"))
    assert energy_free(table8, st) == pytest.approx(
        0.5 * float(np.sum(table8.energies)), rel=1e-12)
    assert energy_noise(table8, st) == 0.0
    assert total_energy(table8, st) == energy_free(table8, st)


def test_two_mode_toy_vacuum_energy():
    table = build_mode_table(
        LatticeSpec(dim=1, sites_per_dim=2, box_length=2.0, mass=1.0))
    st = initial_state(table, KernelInit(kind="vacuum"))
    e0 = table.energies[table.mode_id((0,))]
    e_nyq = table.energies[table.mode_id((1,))]
    assert energy_free(table, st) == pytest.approx((e0 + e_nyq) / 2.0,
                                                   rel=1e-14)


def test_scaled_vacuum_minimizes_free_energy(table8):
    half_sum = 0.5 * float(np.sum(table8.energies))
    for c in (2.0, 0.5, 1.0):
        st = initial_state(table8, KernelInit(kind="scaled", scale=c))
        expected = (1.0 + c * c) / (4.0 * c) * 2.0 * half_sum
        assert energy_free(table8, st) == pytest.approx(expected, rel=1e-12)
        assert energy_free(table8, st) >= half_sum - 1e-12
    st1 = initial_state(table8, KernelInit(kind="scaled", scale=1.0))
    assert energy_free(table8, st1) == pytest.approx(half_sum, rel=1e-12)


def test_energy_split_identity_and_free_conservation(table4):
    """E_total = E0 + E1 identically; E0 is constant along any noisy
    trajectory (Wronskian invariant); E1(0) = 0 for mu0 = 0."""
    init = KernelInit(kind="scaled", scale=1.3 - 0.6j)
    dyn = DynamicsParams(dt=0.01, n_steps=300, lam=0.4, snapshot_stride=60)
    res = run_trajectory(table4, init, dyn, stream=StreamSpec(SEED, 24))
    e0_ref = None
    for k in range(len(res.times)):
        st = res.state_at(k)
        e0 = energy_free(table4, st)
        e1 = energy_noise(table4, st)
        assert total_energy(table4, st) == e0 + e1
        if e0_ref is None:
            e0_ref = e0
            assert e1 == 0.0
        else:
            assert e0 == pytest.approx(e0_ref, rel=1e-10)


def test_energy_noise_is_real_for_random_states(table4, rng):
    """E1 is <H> - E0 of a normalizable Gaussian state, hence exactly
    real; the monitored imaginary residue stays below 1e-10."""
    for _ in range(50):
        st = KernelState(
            t=0.0,
            v_pair=0.2 + rng.random(1) + 1j * rng.standard_normal(1),
            v_sc=0.2 + rng.random(2) + 1j * rng.standard_normal(2),
            mu_plus=rng.standard_normal(1) + 1j * rng.standard_normal(1),
            mu_minus=rng.standard_normal(1) + 1j * rng.standard_normal(1),
            mu_sc=rng.standard_normal(2) + 1j * rng.standard_normal(2),
        )
        e1 = energy_noise(table4, st)        # raises on violation
        assert isinstance(e1, float)
        assert total_energy(table4, st) == pytest.approx(
            oracle_total_energy(table4, st.v_pair, st.v_sc, st.mu_plus,
                                st.mu_minus, st.mu_sc), rel=1e-9)


def test_energy_series_matches_scalar_path(table4):
    init = KernelInit(kind="scaled", scale=0.8 + 0.25j)
    dyn = DynamicsParams(dt=0.02, n_steps=60, lam=0.6, snapshot_stride=20)
    res = run_batch(table4, init, dyn,
                    streams=[StreamSpec(SEED, i) for i in (30, 31)])
    en = energy_series(table4, res.v_pair, res.v_sc,
                       res.mu_plus, res.mu_minus, res.mu_sc)
    assert en["e_total"].shape == (2, len(res.times))
    for b in range(2):
        for k in range(len(res.times)):
            st = res.state_at(k, b)
            assert en["e0"][k] == pytest.approx(energy_free(table4, st),
                                                rel=1e-13)
            assert en["e1"][b, k] == pytest.approx(energy_noise(table4, st),
                                                   rel=1e-12, abs=1e-12)
    # per-mode energies add up to the total
    np.testing.assert_allclose(
        en["pair_energy"].sum(axis=-1) + en["sc_energy"].sum(axis=-1),
        en["e_total"], rtol=1e-12)


def test_reality_monitor_flags_complex_residue():
    """The noise energy of any normalizable Gaussian state is exactly
    real (it is <H> of a Hermitian H), so the monitor can only fire on a
    convention bug.  Exercise the guard directly: residues above the
    relative tolerance raise, residues below pass through."""
    from wnfield.observables import _monitored_real
    with pytest.raises(ConventionViolation):
        _monitored_real(np.array([1.0 + 1e-5j]), "test energy")
    out = _monitored_real(np.array([1.0 + 1e-12j]), "test energy")
    assert out[0] == 1.0


# --- ensemble-mean correlators -------------------------------------------------------

def test_mu_correlators_at_t_zero(table4):
    init = KernelInit(kind="vacuum")
    prod, abs2 = ensemble_mu_correlators(init, table4,
                                         int(table4.pair_plus[0]), 0.3, 0.0)
    assert prod == 0.0 and abs2 == 0.0


def test_mu_correlators_vacuum_closed_form(table4):
    """Vacuum: E[|mu|^2] = lam^2 Omega t / (2 pi)^(2 dim) exactly."""
    spec = table4.spec
    lam = 0.3
    init = KernelInit(kind="vacuum")
    for t in (0.5, 2.5):
        for mid in (int(table4.pair_plus[0]), int(table4.sc_ids[0])):
            _, abs2 = ensemble_mu_correlators(init, table4, mid, lam, t)
            assert abs2 == pytest.approx(
                lam ** 2 * spec.volume * t / TWO_PI ** (2 * spec.dim),
                rel=1e-12)


def test_mu_correlators_match_empirical_ensemble():
    """Both predictions within 5 sigma of a 2000-trajectory ensemble."""
    table = build_mode_table(
        LatticeSpec(dim=1, sites_per_dim=4, box_length=4.0, mass=1.0))
    init = KernelInit(kind="scaled", scale=1.2 - 0.3j)
    lam = 0.4
    dyn = DynamicsParams(dt=0.005, n_steps=200, lam=lam, snapshot_stride=200)
    m = 2000
    res = run_batch(table, init, dyn,
                    streams=[StreamSpec(SEED, i) for i in range(m)])
    t = float(res.times[-1])
    mid = int(table.pair_plus[0])
    prod_pred, abs2_pred = ensemble_mu_correlators(init, table, mid, lam, t)

    mu_p = res.mu_plus[:, -1, 0]
    mu_m = res.mu_minus[:, -1, 0]
    prod = mu_p * mu_m
    abs2 = np.abs(mu_p) ** 2
    for emp, pred in ((prod.real, prod_pred.real),
                      (prod.imag, prod_pred.imag),
                      (abs2, abs2_pred)):
        se = emp.std(ddof=1) / np.sqrt(m)
        assert abs(emp.mean() - pred) < 5.0 * se


def test_mu_correlators_dependent_mode_symmetric(table4):
    init = KernelInit(kind="vacuum")
    plus_id = int(table4.pair_plus[0])
    minus_id = int(table4.pair_minus[0])
    a = ensemble_mu_correlators(init, table4, plus_id, 0.4, 1.2)
    b = ensemble_mu_correlators(init, table4, minus_id, 0.4, 1.2)
    assert a[0] == pytest.approx(b[0], rel=1e-12)
    assert a[1] == pytest.approx(b[1], rel=1e-12)
