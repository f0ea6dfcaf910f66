#!/usr/bin/env python3
"""Benchmark the compiled step loops against the pure-numpy fallback.

Times mu_scan_exact and mu_scan_euler on a representative ensemble batch
and confirms the two backends produce bit-identical outputs (they execute
the same multiply-add sequence by construction).

Run from the repository root:

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --sites 128 --steps 4000

If numba is unavailable (or WNFIELD_BACKEND=numpy), only the numpy
fallback exists and the comparison is skipped.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from wnfield import _accel
from wnfield.kernel_engine import KernelInit, kernel_values
from wnfield.lattice import LatticeSpec, build_mode_table


def build_workload(sites: int, batch: int, n_steps: int, seed: int):
    """Scan inputs exactly as the trajectory engine prepares them."""
    table = build_mode_table(
        LatticeSpec(dim=1, sites_per_dim=sites, box_length=float(sites),
                    mass=1.0))
    init = KernelInit(kind="scaled", scale=1.4 - 0.3j)
    dt, lam = 0.005, 0.3
    t_all = np.arange(n_steps + 1) * dt
    vp, vs, gp, gs = kernel_values(init, table, t_all)
    rng = np.random.default_rng(seed)

    def cnoise(n_modes):
        return (rng.standard_normal((batch, n_steps, n_modes))
                + 1j * rng.standard_normal((batch, n_steps, n_modes))
                ) * np.sqrt(dt / 2.0)

    snap = np.arange(0, n_steps + 1, max(1, n_steps // 10))
    return {
        "table": table,
        "dt": dt,
        "lam": lam,
        "prop_p": np.ascontiguousarray(gp[:-1] / gp[1:]),
        "prop_s": np.ascontiguousarray(gs[:-1] / gs[1:]),
        "v_p": np.ascontiguousarray(vp[:-1]),
        "v_s": np.ascontiguousarray(vs[:-1]),
        "dw_p": cnoise(table.n_pairs),
        "dw_s": cnoise(table.n_sc),
        "snap": snap,
    }


def run_scan(fn, kind: str, w: dict) -> tuple[float, bytes]:
    """One timed scan; returns (seconds, output bytes)."""
    batch = w["dw_p"].shape[0]
    n_p, n_s = w["dw_p"].shape[2], w["dw_s"].shape[2]
    n_snap = len(w["snap"])
    mup = np.zeros((batch, n_p), dtype=np.complex128)
    mum = np.zeros_like(mup)
    mus = np.zeros((batch, n_s), dtype=np.complex128)
    out_p = np.empty((batch, n_snap, n_p), dtype=np.complex128)
    out_m = np.empty_like(out_p)
    out_s = np.empty((batch, n_snap, n_s), dtype=np.complex128)
    t0 = time.perf_counter()
    if kind == "exact":
        fn(w["prop_p"], w["prop_s"], w["dw_p"], w["dw_s"], w["lam"],
           mup, mum, mus, w["snap"], out_p, out_m, out_s)
    else:
        fn(w["v_p"], w["v_s"], w["dt"], w["dw_p"], w["dw_s"], w["lam"],
           mup, mum, mus, w["snap"], out_p, out_m, out_s)
    elapsed = time.perf_counter() - t0
    return elapsed, out_p.tobytes() + out_m.tobytes() + out_s.tobytes()


def best_of(fn, kind, w, repeats):
    times, blob = [], None
    for _ in range(repeats):
        t, blob = run_scan(fn, kind, w)
        times.append(t)
    return min(times), blob


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sites", type=int, default=64,
                        help="lattice sites per dimension (default 64)")
    parser.add_argument("--batch", type=int, default=64,
                        help="trajectories per scan (default 64)")
    parser.add_argument("--steps", type=int, default=2000,
                        help="time steps per scan (default 2000)")
    parser.add_argument("--repeats", type=int, default=5,
                        help="repeats per measurement, best kept (default 5)")
    parser.add_argument("--seed", type=int, default=20260817)
    args = parser.parse_args()

    w = build_workload(args.sites, args.batch, args.steps, args.seed)
    n_modes = w["table"].n_modes
    print(f"workload: {args.sites} sites ({n_modes} modes), "
          f"batch {args.batch}, {args.steps} steps; active backend: "
          f"{_accel.BACKEND}")

    pairs = {
        "mu_scan_exact": ("exact", _accel.mu_scan_exact,
                          _accel._mu_scan_exact_np),
        "mu_scan_euler": ("euler", _accel.mu_scan_euler,
                          _accel._mu_scan_euler_np),
    }

    if _accel.BACKEND != "numba":
        print("numba backend unavailable; timing the numpy fallback only")
        for name, (kind, _, fallback) in pairs.items():
            t_np, _ = best_of(fallback, kind, w, args.repeats)
            print(f"{name:<16s} numpy {t_np * 1e3:8.2f} ms")
        return 0

    header = (f"{'kernel':<16s} {'numba':>10s} {'numpy':>10s} "
              f"{'speedup':>8s}  identical")
    print(header)
    print("-" * len(header))
    for name, (kind, jitted, fallback) in pairs.items():
        run_scan(jitted, kind, w)  # JIT compile outside the timer
        t_nb, blob_nb = best_of(jitted, kind, w, args.repeats)
        t_np, blob_np = best_of(fallback, kind, w, args.repeats)
        same = "yes" if blob_nb == blob_np else "NO"
        print(f"{name:<16s} {t_nb * 1e3:8.2f} ms {t_np * 1e3:8.2f} ms "
              f"{t_np / t_nb:7.1f}x  {same}")
        if same != "yes":
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
