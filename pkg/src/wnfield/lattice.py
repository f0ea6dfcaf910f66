"""Momentum-lattice geometry for a real scalar field in a periodic box.

A cubic box of side L with N_s sites per dimension carries momenta
p = (2 pi / L) n with integer components n in (-N_s/2, N_s/2].  The field
is real, so amplitudes obey phi(-p) = conj(phi(p)) and only half of the
modes are independent.  Modes with n = -n modulo N_s (the zero mode and
the Nyquist planes) are self-conjugate and carry a single real amplitude.

The continuum-to-lattice dictionary is fixed here once and shared by all
other modules:

    integral d^dp f(p)   ->  ((2 pi)^dim / Omega) * sum over all modes
    delta^d(p = 0)       ->  Omega / (2 pi)^dim
    Omega = L^dim,  dp = 2 pi / L,  a = L / N_s

so the Gaussian exponent weight kappa = (2 pi)^(2 dim) / Omega multiplies
|phi(p)|^2 terms (quad_weight below).

Transforms (phi is the field; the noise uses the opposite phase and no
a^d factor, see noise.to_position_noise):

    phi(p) = (a^d / (2 pi)^d) sum_x phi(x) exp(-i p x)
    phi(x) = ((2 pi)^d / Omega) sum_p phi(p) exp(+i p x)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConventionViolation

TWO_PI = 2.0 * np.pi

# mode class codes used in ModeTable.kind
INDEPENDENT = 0
SELF_CONJUGATE = 1
DEPENDENT = 2

CLASS_NAMES = {
    INDEPENDENT: "independent",
    SELF_CONJUGATE: "self_conjugate",
    DEPENDENT: "dependent",
}


def dispersion(p: np.ndarray, mass: float) -> float:
    """Relativistic dispersion E_p = sqrt(p^2 + m^2).

    Accepts a single momentum vector or an (n, dim) stack.
    """
    p = np.asarray(p, dtype=float)
    if mass < 0:
        raise ValueError("mass must be nonnegative")
    return np.sqrt(np.sum(p * p, axis=-1) + mass * mass)


@dataclass(frozen=True)
class LatticeSpec:
    """Box geometry: dimension, sites per dimension, side length, mass."""

    dim: int
    sites_per_dim: int
    box_length: float
    mass: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.sites_per_dim < 2:
            raise ValueError(
                f"sites_per_dim must be >= 2, got {self.sites_per_dim}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        if self.mass < 0:
            raise ValueError("mass must be nonnegative")

    @property
    def volume(self) -> float:
        return self.box_length ** self.dim

    @property
    def dp(self) -> float:
        """Momentum grid spacing 2 pi / L."""
        return TWO_PI / self.box_length

    @property
    def spacing(self) -> float:
        """Lattice spacing a = L / N_s."""
        return self.box_length / self.sites_per_dim

    @property
    def n_modes(self) -> int:
        return self.sites_per_dim ** self.dim

    @property
    def quad_weight(self) -> float:
        """kappa = (2 pi)^(2 dim) / Omega, the |phi(p)|^2 weight."""
        return TWO_PI ** (2 * self.dim) / self.volume


def _component_range(sites: int) -> range:
    # integer components in (-N_s/2, N_s/2], ascending
    lo = -((sites - 1) // 2)
    return range(lo, sites // 2 + 1)


def _canon(v: int, sites: int) -> int:
    lo = -((sites - 1) // 2)
    return (v - lo) % sites + lo


@dataclass(frozen=True)
class ModeTable:
    """Struct-of-arrays catalogue of every lattice mode.

    Modes are ordered lexicographically by integer index vector.  kind
    classifies each mode: a mode n is independent when n > conj(n)
    lexicographically (conj(n) = canonicalized -n), self-conjugate when
    n == conj(n), dependent otherwise.  This extends "first nonzero
    component positive" consistently onto the Nyquist planes, where -n
    wraps back into the grid.

    pair_plus/pair_minus list the (p, -p) partners for independent modes,
    sc_ids the self-conjugate ones; 2*len(pair_plus) + len(sc_ids) equals
    n_modes.
    """

    spec: LatticeSpec
    index_vectors: np.ndarray   # (n_modes, dim) int
    momenta: np.ndarray         # (n_modes, dim) float
    energies: np.ndarray        # (n_modes,) float
    kind: np.ndarray            # (n_modes,) int8, class codes
    partner: np.ndarray         # (n_modes,) int, conjugate mode id
    pair_plus: np.ndarray       # (n_pairs,) int, independent mode ids
    pair_minus: np.ndarray      # (n_pairs,) int, their conjugates
    sc_ids: np.ndarray          # (n_sc,) int

    @property
    def n_modes(self) -> int:
        return len(self.energies)

    @property
    def n_pairs(self) -> int:
        return len(self.pair_plus)

    @property
    def n_sc(self) -> int:
        return len(self.sc_ids)

    @cached_property
    def pair_energies(self) -> np.ndarray:
        return self.energies[self.pair_plus]

    @cached_property
    def sc_energies(self) -> np.ndarray:
        return self.energies[self.sc_ids]

    @cached_property
    def grid_index(self) -> np.ndarray:
        """Flat index of each mode in the FFT grid (index vector mod N_s)."""
        s = self.spec.sites_per_dim
        wrapped = np.mod(self.index_vectors, s)
        shape = (s,) * self.spec.dim
        return np.ravel_multi_index(tuple(wrapped.T), shape)

    def mode_id(self, index_vector) -> int:
        """Look up a mode id by integer index vector."""
        key = tuple(int(v) for v in index_vector)
        try:
            return self._id_map[key]
        except KeyError:
            raise KeyError(f"no mode with index vector {key}") from None

    @cached_property
    def _id_map(self) -> dict:
        return {tuple(int(c) for c in row): i
                for i, row in enumerate(self.index_vectors)}

    def class_name(self, mode_id: int) -> str:
        return CLASS_NAMES[int(self.kind[mode_id])]


def build_mode_table(spec: LatticeSpec) -> ModeTable:
    """Enumerate all modes of the lattice and classify them.

    Postconditions: every mode paired or self-conjugate, energies match
    dispersion(), the independent/dependent split partitions the lattice.
    """
    s = spec.sites_per_dim
    comps = list(_component_range(s))
    vectors = np.array(
        list(itertools.product(comps, repeat=spec.dim)), dtype=np.int64)
    n = len(vectors)

    momenta = vectors * spec.dp
    energies = dispersion(momenta, spec.mass)

    id_map = {tuple(int(c) for c in row): i for i, row in enumerate(vectors)}
    kind = np.empty(n, dtype=np.int8)
    partner = np.empty(n, dtype=np.int64)
    for i, row in enumerate(vectors):
        nv = tuple(int(c) for c in row)
        cv = tuple(_canon(-c, s) for c in nv)
        partner[i] = id_map[cv]
        if nv == cv:
            kind[i] = SELF_CONJUGATE
        elif nv > cv:
            kind[i] = INDEPENDENT
        else:
            kind[i] = DEPENDENT

    pair_plus = np.flatnonzero(kind == INDEPENDENT)
    pair_minus = partner[pair_plus]
    sc_ids = np.flatnonzero(kind == SELF_CONJUGATE)

    if 2 * len(pair_plus) + len(sc_ids) != n:
        raise ConventionViolation(
            "mode classification does not partition the lattice")

    return ModeTable(
        spec=spec,
        index_vectors=vectors,
        momenta=momenta,
        energies=energies,
        kind=kind,
        partner=partner,
        pair_plus=pair_plus,
        pair_minus=pair_minus,
        sc_ids=sc_ids,
    )


def check_conjugation_symmetry(table: ModeTable, amplitudes: np.ndarray,
                               tol: float = 1e-10) -> None:
    """Reject amplitude arrays that break phi(-p) = conj(phi(p))."""
    amplitudes = np.asarray(amplitudes)
    if amplitudes.shape != (table.n_modes,):
        raise ValueError(
            f"expected {table.n_modes} amplitudes, got {amplitudes.shape}")
    scale = max(1.0, float(np.max(np.abs(amplitudes))) if amplitudes.size else 1.0)
    bad = np.abs(amplitudes - np.conj(amplitudes[table.partner]))
    if np.any(bad > tol * scale):
        worst = int(np.argmax(bad))
        raise ConventionViolation(
            f"conjugation symmetry violated at mode {worst}: "
            f"|phi(n) - conj(phi(-n))| = {bad[worst]:.3e}")


def to_position_field(table: ModeTable, amplitudes: np.ndarray,
                      tol: float = 1e-10) -> np.ndarray:
    """Inverse transform phi(x) = ((2 pi)^d / Omega) sum_p phi(p) exp(+i p x).

    amplitudes is indexed by mode id; the result is a real array of shape
    (N_s,)*dim.  Raises ConventionViolation if the input breaks
    conjugation symmetry (the result would not be real).
    """
    spec = table.spec
    check_conjugation_symmetry(table, amplitudes, tol)
    shape = (spec.sites_per_dim,) * spec.dim
    grid = np.zeros(shape, dtype=np.complex128).reshape(-1)
    grid[table.grid_index] = np.asarray(amplitudes, dtype=np.complex128)
    grid = grid.reshape(shape)
    # sum_p phi(p) e^{+ipx} = n_modes * ifftn(grid)
    out = np.fft.ifftn(grid) * (table.n_modes * TWO_PI ** spec.dim / spec.volume)
    scale = max(1.0, float(np.max(np.abs(out.real))))
    if np.max(np.abs(out.imag)) > tol * scale:
        raise ConventionViolation("position field came out complex")
    return np.ascontiguousarray(out.real)


def from_position_field(table: ModeTable, field: np.ndarray) -> np.ndarray:
    """Forward transform phi(p) = (a^d / (2 pi)^d) sum_x phi(x) exp(-i p x).

    Returns amplitudes indexed by mode id.
    """
    spec = table.spec
    shape = (spec.sites_per_dim,) * spec.dim
    field = np.asarray(field, dtype=float)
    if field.shape != shape:
        raise ValueError(f"expected field of shape {shape}, got {field.shape}")
    grid = np.fft.fftn(field) * (spec.spacing ** spec.dim / TWO_PI ** spec.dim)
    return grid.reshape(-1)[table.grid_index]
