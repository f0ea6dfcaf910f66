"""Deterministic parallel ensembles with streaming statistics.

Trajectories are grouped into fixed batches of BATCH_SIZE consecutive
ids.  Each batch accumulates Welford moments of every tracked observable
and the batch partials are merged in a pairwise tree keyed by batch
index.  The reduction layout therefore never depends on the worker
count or scheduling order, and ensemble output is byte-identical across
re-runs and across --threads settings.  Any trajectory failure aborts
the whole ensemble.

Tracked per snapshot time: E1, E_total, and per-mode series (energies,
field centers, mu correlators).  Tracked per trajectory: the OLS slope
of E1 and E_total over the snapshot grid.  The mean of per-trajectory
OLS slopes equals the OLS slope of the mean curve, but its standard
error is estimated over independent trajectories, which stays valid
where the time-correlated residuals of the mean curve would not.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import observables
from .errors import EnsembleAborted, WnfieldError
from .kernel_engine import DynamicsParams, KernelInit, run_batch
from .lattice import ModeTable
from .noise import StreamSpec

BATCH_SIZE = 64


class RunningMoments:
    """Welford accumulator over vector samples."""

    def __init__(self, shape):
        self.count = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def add(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def merge(self, other: "RunningMoments") -> None:
        if other.count == 0:
            return
        if self.count == 0:
            self.count = other.count
            self.mean = other.mean.copy()
            self.m2 = other.m2.copy()
            return
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.count / n)
        self.m2 = self.m2 + other.m2 + delta * delta * (
            self.count * other.count / n)
        self.count = n

    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.full_like(self.m2, np.nan)
        return self.m2 / (self.count - 1)

    def stderr(self) -> np.ndarray:
        return np.sqrt(self.variance() / self.count)


def observable_names(table: ModeTable) -> list[str]:
    """Column layout of the per-snapshot sample matrix."""
    names = ["E1", "E_total"]
    for mid in table.pair_plus:
        names += [f"pair_energy[{mid}]", f"pair_phi_re[{mid}]",
                  f"pair_phi_im[{mid}]", f"mu_abs2[{mid}]",
                  f"mu_prod_re[{mid}]", f"mu_prod_im[{mid}]"]
    for mid in table.sc_ids:
        names += [f"sc_energy[{mid}]", f"sc_phi[{mid}]",
                  f"mu_abs2[{mid}]", f"mu_prod_re[{mid}]",
                  f"mu_prod_im[{mid}]"]
    return names


def _samples(table: ModeTable, res) -> np.ndarray:
    """(batch, n_snap, n_obs) observable matrix for one batch result."""
    en = observables.energy_series(
        table, res.v_pair, res.v_sc, res.mu_plus, res.mu_minus, res.mu_sc)
    vrp = res.v_pair.real
    vrs = res.v_sc.real
    phi_p = (np.conj(res.mu_plus) + res.mu_minus) / (2.0 * vrp)
    phi_s = res.mu_sc.real / vrs

    cols = [en["e1"], en["e_total"]]
    for j in range(table.n_pairs):
        mp = res.mu_plus[:, :, j]
        mm = res.mu_minus[:, :, j]
        prod = mp * mm
        cols += [en["pair_energy"][:, :, j], phi_p[:, :, j].real,
                 phi_p[:, :, j].imag, np.abs(mp) ** 2,
                 prod.real, prod.imag]
    for j in range(table.n_sc):
        ms = res.mu_sc[:, :, j]
        prod = ms * ms
        cols += [en["sc_energy"][:, :, j], phi_s[:, :, j],
                 np.abs(ms) ** 2, prod.real, prod.imag]
    return np.stack(cols, axis=-1)


SLOPE_NAMES = ("slope_E1", "slope_E_total")


@dataclass
class EnsembleStats:
    """Merged ensemble statistics on a shared snapshot grid."""

    times: np.ndarray
    names: list[str]
    moments: RunningMoments          # shape (n_snap, n_obs)
    slope_moments: RunningMoments    # shape (2,)

    @property
    def n_traj(self) -> int:
        return self.moments.count

    def merge(self, other: "EnsembleStats") -> None:
        self.moments.merge(other.moments)
        self.slope_moments.merge(other.slope_moments)

    def _col(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown observable {name!r}") from None

    def series(self, name: str):
        """(mean, stderr) arrays over the snapshot grid."""
        j = self._col(name)
        return self.moments.mean[:, j].copy(), self.moments.stderr()[:, j]

    def slope(self, name: str = "slope_E1"):
        j = SLOPE_NAMES.index(name)
        return (float(self.slope_moments.mean[j]),
                float(self.slope_moments.stderr()[j]))


def _batch_ids(n_traj: int):
    return [range(lo, min(lo + BATCH_SIZE, n_traj))
            for lo in range(0, n_traj, BATCH_SIZE)]


def _run_one_batch(table, init, dyn, master_seed, ids, times, names):
    streams = [StreamSpec(master_seed, i) for i in ids]
    res = run_batch(table, init, dyn, streams=streams)
    samples = _samples(table, res)
    moments = RunningMoments((len(times), len(names)))
    slope_moments = RunningMoments((len(SLOPE_NAMES),))
    tc = times - times.mean()
    denom = float(tc @ tc)
    i_e1 = names.index("E1")
    i_et = names.index("E_total")
    for b in range(samples.shape[0]):
        moments.add(samples[b])
        if denom > 0:
            slope_moments.add(np.array([
                float(tc @ samples[b, :, i_e1]) / denom,
                float(tc @ samples[b, :, i_et]) / denom,
            ]))
    return EnsembleStats(times=times, names=names, moments=moments,
                         slope_moments=slope_moments)


def _merge_tree(parts: list[EnsembleStats]) -> EnsembleStats:
    while len(parts) > 1:
        merged = []
        for i in range(0, len(parts), 2):
            if i + 1 < len(parts):
                parts[i].merge(parts[i + 1])
            merged.append(parts[i])
        parts = merged
    return parts[0]


def default_workers() -> int:
    env = os.environ.get("WNFIELD_THREADS", "").strip()
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("WNFIELD_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def run_ensemble(table: ModeTable, init: KernelInit, dyn: DynamicsParams,
                 n_traj: int, master_seed: int,
                 workers: int | None = None) -> EnsembleStats:
    """Run trajectories 0..n_traj-1 and merge their statistics.

    The result is independent of the worker count; trajectory ids, not
    workers, address the noise streams.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if workers is None:
        workers = default_workers()
    workers = max(1, min(workers, 32))
    groups = _batch_ids(n_traj)
    times = (np.arange(dyn.n_steps + 1) * dyn.dt)[dyn.snapshot_steps()]
    names = observable_names(table)

    def job(ids):
        try:
            return _run_one_batch(table, init, dyn, master_seed, ids,
                                  times, names)
        except WnfieldError as exc:
            raise EnsembleAborted(ids.start, exc) from exc

    if workers == 1 or len(groups) == 1:
        parts = [job(ids) for ids in groups]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, groups))
    return _merge_tree(parts)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    slope_se: float
    r_squared: float


def fit_linear(x, y, se=None) -> SlopeFit:
    """Least-squares line through (x, y), optionally weighted by 1/se^2.

    Unweighted: the slope SE comes from the residual variance.  Weighted:
    from the weight matrix.  Degenerate abscissas are rejected.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise ValueError("need at least 3 aligned points")
    if np.ptp(x) == 0:
        raise ValueError("abscissa is degenerate")
    with np.errstate(divide="ignore"):
        w = np.ones_like(x) if se is None else 1.0 / np.asarray(se, float) ** 2
    if se is not None and np.any(~np.isfinite(w)):
        raise ValueError("weights must be finite and positive")
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    sst = (w * (y - ym) ** 2).sum()
    ssr = (w * resid ** 2).sum()
    r2 = 1.0 if sst == 0 else 1.0 - ssr / sst
    if se is None:
        dof = len(x) - 2
        slope_se = float(np.sqrt(ssr / dof / sxx)) if dof > 0 else np.nan
    else:
        slope_se = float(np.sqrt(1.0 / sxx))
    return SlopeFit(slope=float(slope), intercept=float(intercept),
                    slope_se=slope_se, r_squared=float(r2))
