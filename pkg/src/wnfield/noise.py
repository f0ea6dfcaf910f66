"""Spacetime white noise sampled directly in momentum space.

One time slice of width dt carries independent Gaussian increments
dW(x) per site with variance dt * a^d.  In momentum space (transform
convention below, opposite phase to the field and no a^d factor),

    dW(p)  = (1 / (2 pi)^d) sum_x dW(x) exp(+i p x)
    dW(x)  = (a^d (2 pi)^d / Omega) sum_p dW(p) exp(-i p x)

the increments become complex Gaussians with conjugation symmetry
dW(-p) = conj(dW(p)) and

    E[ Re dW(p)^2 ] = E[ Im dW(p)^2 ] = D = Omega dt / (2 (2 pi)^(2d))

per independent paired mode, while self-conjugate modes are real with
variance 2D.  E[|dW(p)|^2] = 2D for every mode.

Streams are counter-addressed: trajectory t of master seed s uses
Philox(key = s | t << 64) and slice k starts at counter k * blocks,
so any slice can be generated without generating its predecessors and
bulk generation of a whole trajectory is bit-identical to per-slice
access.  Each counter block yields 4 uint64 words; normals come from
Box-Muller on u = ((w >> 11) + 1) * 2^-53 in (0, 1].  Per slice the
normal vector is laid out as [re(pairs), im(pairs), self-conjugate].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import TWO_PI, ModeTable

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class StreamSpec:
    """Addresses one trajectory's noise stream."""

    master_seed: int
    trajectory_id: int

    def __post_init__(self):
        if not 0 <= self.master_seed <= _U64:
            raise ValueError("master_seed must fit in 64 bits")
        if not 0 <= self.trajectory_id <= _U64:
            raise ValueError("trajectory_id must fit in 64 bits")

    @property
    def key(self) -> int:
        return self.master_seed | (self.trajectory_id << 64)


@dataclass(frozen=True)
class NoiseSlice:
    """Momentum-space increments for one time slice.

    pair[j] is dW(p) for table.pair_plus[j]; the dW(-p) partner is its
    conjugate and is never stored.  sc[j] is the real increment for
    table.sc_ids[j].
    """

    dt: float
    pair: np.ndarray  # (n_pairs,) complex128
    sc: np.ndarray    # (n_sc,) float64


def component_variance(table: ModeTable, dt: float) -> float:
    """D = Omega dt / (2 (2 pi)^(2d)): variance per real component."""
    return table.spec.volume * dt / (2.0 * TWO_PI ** (2 * table.spec.dim))


def _layout(table: ModeTable):
    n_comp = 2 * table.n_pairs + table.n_sc
    n_bm = 2 * ((n_comp + 1) // 2)       # Box-Muller outputs come in pairs
    blocks = (n_bm + 3) // 4              # Philox counter ticks per slice
    return n_comp, n_bm, blocks


def blocks_per_slice(table: ModeTable) -> int:
    return _layout(table)[2]


def sample_block(table: ModeTable, dt: float, stream: StreamSpec,
                 start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample slices [start, start + count) in one draw.

    Returns (pair, sc) arrays of shapes (count, n_pairs) and
    (count, n_sc).  Bit-identical to calling sample_slice repeatedly.
    """
    if start < 0 or count < 0:
        raise ValueError("slice range must be nonnegative")
    n_comp, n_bm, blocks = _layout(table)
    bg = np.random.Philox(key=stream.key, counter=start * blocks)
    words = np.random.Generator(bg).integers(
        0, 1 << 64, size=(count, 4 * blocks), dtype=np.uint64)
    u = ((words >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    half = n_bm // 2
    r = np.sqrt(-2.0 * np.log(u[:, :half]))
    ang = TWO_PI * u[:, half:2 * half]
    z = np.concatenate([r * np.cos(ang), r * np.sin(ang)], axis=1)[:, :n_comp]

    d = component_variance(table, dt)
    npair = table.n_pairs
    pair = np.sqrt(d) * (z[:, :npair] + 1j * z[:, npair:2 * npair])
    sc = np.sqrt(2.0 * d) * z[:, 2 * npair:n_comp]
    return np.ascontiguousarray(pair), np.ascontiguousarray(sc)


def sample_slice(table: ModeTable, dt: float, stream: StreamSpec,
                 slice_index: int) -> NoiseSlice:
    """Sample the increments of one slice by its absolute index."""
    pair, sc = sample_block(table, dt, stream, slice_index, 1)
    return NoiseSlice(dt=dt, pair=pair[0], sc=sc[0])


def to_position_noise(table: ModeTable, sl: NoiseSlice) -> np.ndarray:
    """Reassemble dW(x) = (a^d (2 pi)^d / Omega) sum_p dW(p) exp(-i p x).

    Returns a real (N_s,)*dim array whose per-site variance is dt * a^d.
    """
    spec = table.spec
    full = np.zeros(table.n_modes, dtype=np.complex128)
    full[table.pair_plus] = sl.pair
    full[table.pair_minus] = np.conj(sl.pair)
    full[table.sc_ids] = sl.sc
    shape = (spec.sites_per_dim,) * spec.dim
    grid = np.zeros(shape, dtype=np.complex128).reshape(-1)
    grid[table.grid_index] = full
    grid = grid.reshape(shape)
    # sum_p dW(p) e^{-ipx} matches fftn's phase
    out = np.fft.fftn(grid) * (TWO_PI ** spec.dim / table.n_modes)
    return np.ascontiguousarray(out.real)


# --- replay files -----------------------------------------------------------

_MAGIC = b"WNFN\x01\x00"


def write_noise_bin(path, table: ModeTable, dt: float,
                    pair: np.ndarray, sc: np.ndarray) -> None:
    """Dump a trajectory's increments to a binary replay file."""
    pair = np.ascontiguousarray(pair, dtype=np.complex128)
    sc = np.ascontiguousarray(sc, dtype=np.float64)
    n_slices = pair.shape[0] if table.n_pairs else sc.shape[0]
    if pair.shape != (n_slices, table.n_pairs):
        raise ValueError("pair array shape does not match the table")
    if sc.shape != (n_slices, table.n_sc):
        raise ValueError("sc array shape does not match the table")
    header = np.array(
        [table.spec.dim, table.spec.sites_per_dim, table.n_pairs,
         table.n_sc, n_slices],
        dtype=np.uint64)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.tobytes())
        fh.write(np.float64(dt).tobytes())
        fh.write(pair.tobytes())
        fh.write(sc.tobytes())


def read_noise_bin(path, table: ModeTable | None = None):
    """Read a replay file; returns (dt, pair, sc)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a noise replay file")
        header = np.frombuffer(fh.read(5 * 8), dtype=np.uint64)
        dim, sites, n_pairs, n_sc, n_slices = (int(v) for v in header)
        dt = float(np.frombuffer(fh.read(8), dtype=np.float64)[0])
        pair = np.frombuffer(
            fh.read(n_slices * n_pairs * 16), dtype=np.complex128)
        sc = np.frombuffer(fh.read(n_slices * n_sc * 8), dtype=np.float64)
    pair = pair.reshape(n_slices, n_pairs).copy()
    sc = sc.reshape(n_slices, n_sc).copy()
    if table is not None:
        if (dim, sites) != (table.spec.dim, table.spec.sites_per_dim):
            raise ValueError(
                f"{path}: replay lattice {dim}d/{sites} does not match "
                f"{table.spec.dim}d/{table.spec.sites_per_dim}")
        if n_pairs != table.n_pairs or n_sc != table.n_sc:
            raise ValueError(f"{path}: replay mode counts do not match")
    return dt, pair, sc
