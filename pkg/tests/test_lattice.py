"""Mode enumeration, classification, transforms, and the factor dictionary."""


import numpy as np
import pytest

from wnfield import (ConventionViolation, LatticeSpec, build_mode_table,
                     check_conjugation_symmetry, dispersion,
                     from_position_field, to_position_field)

TWO_PI = 2.0 * np.pi


# --- dispersion ----------------------------------------------------------------

def test_dispersion_literals():
    assert dispersion(np.array([0.0]), 1.0) == 1.0
    assert dispersion(np.array([3.0, 0.0, 0.0]), 4.0) == 5.0
    p = np.array([0.7, -1.2, 0.4])
    assert dispersion(p, 0.0) == pytest.approx(np.linalg.norm(p), rel=1e-15)


def test_dispersion_rejects_negative_mass():
    with pytest.raises(ValueError):
        dispersion(np.array([1.0]), -1.0)


# --- classification ------------------------------------------------------------

def test_dim1_four_sites_classification(table4):
    # exhaustive enumeration: indices {-1, 0, 1, 2}
    assert [int(v) for v in table4.index_vectors[:, 0]] == [-1, 0, 1, 2]
    classes = {int(n): table4.class_name(table4.mode_id((n,)))
               for n in (-1, 0, 1, 2)}
    assert classes == {
        -1: "dependent",
        0: "self_conjugate",
        1: "independent",
        2: "self_conjugate",
    }
    assert list(table4.pair_plus) == [table4.mode_id((1,))]
    assert list(table4.pair_minus) == [table4.mode_id((-1,))]
    assert sorted(int(i) for i in table4.sc_ids) == [
        table4.mode_id((0,)), table4.mode_id((2,))]


def test_dim1_two_sites_all_self_conjugate():
    table = build_mode_table(
        LatticeSpec(dim=1, sites_per_dim=2, box_length=2.0, mass=1.0))
    assert table.n_modes == 2
    assert table.n_pairs == 0
    assert table.n_sc == 2


@pytest.mark.parametrize("dim,max_sites", [(1, 16), (2, 16), (3, 9)])
def test_partition_identity_and_involution(dim, max_sites):
    for sites in range(2, max_sites + 1):
        table = build_mode_table(LatticeSpec(
            dim=dim, sites_per_dim=sites, box_length=1.5, mass=0.5))
        n = sites ** dim
        assert table.n_modes == n
        # counting identity: 2 |independent| + |self-conjugate| = N_full
        assert 2 * table.n_pairs + table.n_sc == n
        # conjugation is an involution and fixes exactly the sc modes
        assert np.array_equal(table.partner[table.partner], np.arange(n))
        fixed = table.partner == np.arange(n)
        assert np.array_equal(np.flatnonzero(fixed), table.sc_ids)
        # dependent modes are exactly the images of independent ones
        assert set(table.pair_minus) == set(
            np.flatnonzero(table.kind == 2))


def test_energies_match_dispersion(table8):
    spec = table8.spec
    expected = dispersion(table8.index_vectors * spec.dp, spec.mass)
    np.testing.assert_allclose(table8.energies, expected, rtol=1e-15)
    assert np.all(table8.energies >= spec.mass)


def test_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(dim=4, sites_per_dim=4, box_length=1.0)
    with pytest.raises(ValueError):
        LatticeSpec(dim=1, sites_per_dim=1, box_length=1.0)
    with pytest.raises(ValueError):
        LatticeSpec(dim=1, sites_per_dim=4, box_length=-1.0)


# --- continuum-lattice dictionary ------------------------------------------------

@pytest.mark.parametrize("dim,sites,length", [(1, 8, 8.0), (2, 4, 3.0),
                                              (3, 4, 2.5)])
def test_factor_dictionary(dim, sites, length):
    spec = LatticeSpec(dim=dim, sites_per_dim=sites, box_length=length,
                       mass=1.0)
    # Omega dp^dim = (2 pi)^dim  and  dp^dim N_full = (2 pi / a)^dim
    assert spec.volume * spec.dp ** dim == pytest.approx(
        TWO_PI ** dim, rel=1e-14)
    assert spec.dp ** dim * spec.n_modes == pytest.approx(
        (TWO_PI / spec.spacing) ** dim, rel=1e-14)
    assert spec.quad_weight == pytest.approx(
        TWO_PI ** (2 * dim) / spec.volume, rel=1e-15)


# --- transforms ------------------------------------------------------------------

def test_zero_amplitudes_zero_field(table8):
    field = to_position_field(table8, np.zeros(table8.n_modes, complex))
    assert field.shape == (8,)
    assert np.all(field == 0.0)


def test_single_mode_is_cosine_direct_sum(table8):
    """a(p)=1 on one independent mode (+ partner) against a direct
    position-space summation oracle."""
    spec = table8.spec
    mid = table8.mode_id((1,))
    amps = np.zeros(table8.n_modes, dtype=complex)
    amps[mid] = 1.0
    amps[table8.partner[mid]] = 1.0
    field = to_position_field(table8, amps)

    # oracle: phi(x) = ((2 pi)^d / Omega) sum_p a(p) exp(+i p x), summed
    # explicitly over the two occupied modes at x = a * j
    x = spec.spacing * np.arange(spec.sites_per_dim)
    p = spec.dp
    oracle = (TWO_PI / spec.volume) * 2.0 * np.cos(p * x)
    np.testing.assert_allclose(field, oracle, rtol=1e-12, atol=1e-14)


def test_random_symmetric_round_trip(rng):
    for dim, sites in ((1, 8), (2, 6), (3, 4)):
        table = build_mode_table(LatticeSpec(
            dim=dim, sites_per_dim=sites, box_length=2.0 + dim, mass=0.7))
        amps = np.zeros(table.n_modes, dtype=complex)
        z = rng.standard_normal(table.n_pairs) \
            + 1j * rng.standard_normal(table.n_pairs)
        amps[table.pair_plus] = z
        amps[table.pair_minus] = np.conj(z)
        amps[table.sc_ids] = rng.standard_normal(table.n_sc)

        field = to_position_field(table, amps)
        assert field.dtype == np.float64
        back = from_position_field(table, field)
        np.testing.assert_allclose(back, amps, rtol=1e-12, atol=1e-13)

        # and the other composition: forward then inverse
        f2 = to_position_field(table, back, tol=1e-9)
        np.testing.assert_allclose(f2, field, rtol=1e-12, atol=1e-13)


def test_conjugation_violation_rejected(table8):
    amps = np.zeros(table8.n_modes, dtype=complex)
    amps[table8.pair_plus[0]] = 1.0 + 1.0j   # partner left at zero
    with pytest.raises(ConventionViolation):
        check_conjugation_symmetry(table8, amps)
    with pytest.raises(ConventionViolation):
        to_position_field(table8, amps)
    # complex amplitude on a self-conjugate mode is also rejected
    amps2 = np.zeros(table8.n_modes, dtype=complex)
    amps2[table8.sc_ids[0]] = 1.0j
    with pytest.raises(ConventionViolation):
        to_position_field(table8, amps2)


def test_mode_id_lookup_errors(table4):
    with pytest.raises(KeyError):
        table4.mode_id((5,))


def test_grid_index_covers_grid(table8):
    assert sorted(table8.grid_index) == list(range(table8.n_modes))
