"""The verification battery: every cross-oracle acceptance check.

Each criterion is a function returning a CriterionResult with a measured
value and a hard pass/fail.  run_battery executes all of them (JIT
warmup happens once, outside the per-criterion timers) and prints a
table.  The same functions back tests/test_acceptance.py, so the CLI
`verify` subcommand and the test suite cannot drift apart.

All statistical gates use fixed derived seeds, so a pass is
deterministic for a given package version.
"""

from __future__ import annotations

import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .. import classical_oracle, ensemble, lindblad_oracle, observables
from ..errors import WnfieldError
from ..kernel_engine import (DynamicsParams, KernelInit, initial_state,
                             kernel_values, propagator, riccati_exact,
                             riccati_rhs, run_batch)
from ..lattice import LatticeSpec, build_mode_table
from ..noise import (NoiseSlice, StreamSpec, component_variance, sample_block,
                     sample_slice, to_position_noise)

DEFAULT_SEED = 20260817


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: str
    runtime: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{self.number:2d}] {status}  {self.name:<38s} "
                f"{self.measured}  ({self.runtime:.1f}s)")


def _rng(seed: int, salt: int) -> np.random.Generator:
    return np.random.default_rng([seed, salt])


def warmup() -> None:
    """Compile the hot kernels once so criterion timers measure physics."""
    spec = LatticeSpec(dim=1, sites_per_dim=4, box_length=4.0, mass=1.0)
    table = build_mode_table(spec)
    for scheme in ("exact", "euler"):
        dyn = DynamicsParams(dt=0.01, n_steps=4, lam=0.1, scheme=scheme,
                             snapshot_stride=2)
        run_batch(table, KernelInit(kind="vacuum"), dyn,
                  streams=[StreamSpec(1, 0)])
        classical_oracle.run_classical(table, dyn, streams=[StreamSpec(1, 0)])


# --- 1: closed-form Riccati flow against an RK4 ODE oracle ---------------------

def criterion_01(seed: int = DEFAULT_SEED) -> CriterionResult:
    rng = _rng(seed, 1)
    n_cases = 50
    e = 0.3 + 2.7 * rng.random(n_cases)
    v0 = (0.05 + 2.95 * rng.random(n_cases)) * e \
        + 1j * (2.0 * rng.random(n_cases) - 1.0) * e
    worst = 0.0
    n_sub = 400
    n_checks = 50
    # march all 50 cases at once; compare against the closed form at each
    # checkpoint of the per-case span [0, 10/E]
    v_rk = np.array(v0, dtype=np.complex128)
    h = (10.0 / e) / (n_checks * n_sub)
    for chk in range(1, n_checks + 1):
        v = v_rk
        for _ in range(n_sub):
            k1 = riccati_rhs(v, e)
            k2 = riccati_rhs(v + 0.5 * h * k1, e)
            k3 = riccati_rhs(v + 0.5 * h * k2, e)
            k4 = riccati_rhs(v + h * k3, e)
            v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        v_rk = v
        t = (10.0 / e) * (chk / n_checks)
        v_cf = riccati_exact(v0, e, t)
        rel = np.abs(v_rk - v_cf) / np.maximum(np.abs(v_cf), e)
        worst = max(worst, float(rel.max()))
    tol = 1e-8
    return CriterionResult(
        1, "Riccati closed form vs RK4 oracle", worst <= tol,
        f"max rel err {worst:.2e} (tol {tol:.0e})")


# --- 2: kernel special cases ----------------------------------------------------

def criterion_02(seed: int = DEFAULT_SEED) -> CriterionResult:
    rng = _rng(seed, 2)
    worst = 0.0
    checks = []

    # stationarity of the vacuum kernel
    e = 0.4 + 2.6 * rng.random(8)
    for t in np.linspace(0.0, 10.0, 101)[1:]:
        v = riccati_exact(e.astype(np.complex128), e, t / e)
        checks.append(("stationary", float(np.max(np.abs(v - e) / e)), 1e-12))

    # periodicity V(n pi / E) = V0 and half-period duality V = E^2 / V0
    for _ in range(10):
        ee = 0.5 + 2.5 * rng.random()
        vv0 = complex((0.2 + 2.0 * rng.random()) * ee,
                      (2.0 * rng.random() - 1.0) * ee)
        for n in range(4):
            t_full = n * np.pi / ee
            v = complex(riccati_exact(vv0, ee, t_full))
            checks.append(("period", abs(v - vv0) / max(1.0, abs(vv0)), 1e-9))
            t_half = (n + 0.5) * np.pi / ee
            v = complex(riccati_exact(vv0, ee, t_half))
            dual = ee * ee / vv0
            checks.append(("half-period", abs(v - dual) / max(1.0, abs(dual)),
                           1e-9))

    # V0 = 0: V = i E tan(tE), away from odd multiples of pi/2
    te = np.array([0.3, 0.7, 1.1, 1.9, 2.3, 2.8, 4.0, 5.5])
    for ee in (0.7, 1.0, 2.3):
        t = te / ee
        v = riccati_exact(0.0 + 0.0j, ee, t)
        ref = 1j * ee * np.tan(te)
        rel = np.abs(v - ref) / np.maximum(1.0, np.abs(ref))
        checks.append(("tan limit", float(rel.max()), 1e-9))

    # V0 -> infinity: V -> -i E cot(tE); probe with a huge real V0
    for ee in (0.7, 1.0, 2.3):
        t = te / ee
        big = 1e10 * ee
        v = riccati_exact(big + 0.0j, ee, t)
        ref = -1j * ee / np.tan(te)
        rel = np.abs(v - ref) / np.maximum(1.0, np.abs(ref))
        checks.append(("cot limit", float(rel.max()), 1e-9))

    # the deterministic kernel kind carries the cot form exactly
    spec = LatticeSpec(dim=1, sites_per_dim=4, box_length=4.0, mass=1.0)
    table = build_mode_table(spec)
    det = KernelInit(kind="deterministic")
    for t in (0.2, 0.45, 0.8):
        vp, vs, _, _ = kernel_values(det, table, t)
        ref_p = -1j * table.pair_energies / np.tan(t * table.pair_energies)
        ref_s = -1j * table.sc_energies / np.tan(t * table.sc_energies)
        rel = max(float(np.max(np.abs(vp - ref_p) / np.abs(ref_p))),
                  float(np.max(np.abs(vs - ref_s) / np.abs(ref_s))))
        checks.append(("deterministic cot", rel, 1e-12))

    bad = [c for c in checks if c[1] > c[2]]
    worst = max(c[1] / c[2] for c in checks)
    return CriterionResult(
        2, "kernel special cases and limits", not bad,
        f"worst err/tol ratio {worst:.2e}" + (
            f" [{bad[0][0]}]" if bad else ""))


# --- 3: propagator = phase ratio, and composition --------------------------------

def criterion_03(seed: int = DEFAULT_SEED) -> CriterionResult:
    rng = _rng(seed, 3)
    worst_quad = 0.0
    worst_comp = 0.0
    for _ in range(100):
        e = 0.4 + 2.6 * rng.random()
        v0 = complex((0.1 + 2.4 * rng.random()) * e,
                     (2.0 * rng.random() - 1.0) * e)
        t1, t2, t3 = np.sort(rng.random(3)) * 8.0 / e

        def v_re(s):
            return complex(riccati_exact(v0, e, s)).real

        def v_im(s):
            return complex(riccati_exact(v0, e, s)).imag

        opts = dict(limit=200, epsabs=1e-12, epsrel=1e-11)
        i_re = integrate.quad(v_re, t1, t2, **opts)[0]
        i_im = integrate.quad(v_im, t1, t2, **opts)[0]
        z = np.exp(-1j * (i_re + 1j * i_im))
        p12 = complex(propagator(v0, e, t1, t2))
        worst_quad = max(worst_quad,
                         abs(z - p12) / max(1.0, abs(p12)))

        p13 = complex(propagator(v0, e, t1, t3))
        p23 = complex(propagator(v0, e, t2, t3))
        worst_comp = max(worst_comp,
                         abs(p13 - p12 * p23) / max(1.0, abs(p13)))
    ok = worst_quad <= 1e-8 and worst_comp <= 1e-12
    return CriterionResult(
        3, "propagator vs quadrature of V", ok,
        f"quad err {worst_quad:.2e} (tol 1e-08), "
        f"composition err {worst_comp:.2e} (tol 1e-12)")


# --- 4: noise statistics and determinism ----------------------------------------

def criterion_04(seed: int = DEFAULT_SEED) -> CriterionResult:
    spec = LatticeSpec(dim=1, sites_per_dim=4, box_length=4.0, mass=1.0)
    table = build_mode_table(spec)
    dt = 0.37
    d = component_variance(table, dt)
    n = 100_000
    pair, sc = sample_block(table, dt, StreamSpec(seed, 7), 0, n)

    band = 5.0 * np.sqrt(2.0 / (n - 1))
    devs = []
    for comp, target in ((pair.real[:, 0], d), (pair.imag[:, 0], d),
                         (sc[:, 0], 2 * d), (sc[:, 1], 2 * d)):
        devs.append(abs(float(np.var(comp, ddof=1)) / target - 1.0))
    var_ok = max(devs) <= band

    # Parseval per slice: sum_x dW(x)^2 = (2pi)^(2d)/N * sum_p |dW(p)|^2
    parseval = 0.0
    factor = (2.0 * np.pi) ** (2 * spec.dim) / table.n_modes
    for k in range(100):
        sl = sample_slice(table, dt, StreamSpec(seed, 8), k)
        dwx = to_position_noise(table, sl)
        lhs = float(np.sum(dwx ** 2))
        rhs = factor * float(2.0 * np.sum(np.abs(sl.pair) ** 2)
                             + np.sum(sl.sc ** 2))
        parseval = max(parseval, abs(lhs - rhs) / max(1.0, abs(rhs)))
    parseval_ok = parseval <= 1e-12

    # position-space cell variance dt * a^d
    m = 10_000
    pair_m, sc_m = pair[:m], sc[:m]
    sites = np.empty((m, spec.n_modes))
    for k in range(m):
        sites[k] = to_position_noise(
            table, NoiseSlice(dt=dt, pair=pair_m[k], sc=sc_m[k])).reshape(-1)
    target = dt * spec.spacing ** spec.dim
    nsite = sites.size
    cell_dev = abs(float(np.var(sites.reshape(-1), ddof=1)) / target - 1.0)
    cell_ok = cell_dev <= 5.0 * np.sqrt(2.0 / (nsite - 1))

    # byte-exact ensemble output across worker counts
    from .outputs import write_ensemble_csv
    dyn = DynamicsParams(dt=0.01, n_steps=100, lam=0.1, scheme="exact",
                         snapshot_stride=20)
    init = KernelInit(kind="vacuum")
    blobs = []
    for workers in (1, 4):
        stats = ensemble.run_ensemble(table, init, dyn, 96, seed,
                                      workers=workers)
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "ensemble.csv")
            write_ensemble_csv(path, stats)
            with open(path, "rb") as fh:
                blobs.append(fh.read())
    determinism_ok = blobs[0] == blobs[1]

    ok = var_ok and parseval_ok and cell_ok and determinism_ok
    return CriterionResult(
        4, "noise statistics and determinism", ok,
        f"var dev {max(devs):.2e} (band {band:.2e}), parseval {parseval:.1e},"
        f" cell dev {cell_dev:.2e}, byte-equal={determinism_ok}")


# --- 5: Ehrenfest correspondence -------------------------------------------------

def criterion_05(seed: int = DEFAULT_SEED) -> CriterionResult:
    spec = LatticeSpec(dim=1, sites_per_dim=8, box_length=8.0, mass=1.0)
    table = build_mode_table(spec)
    init = KernelInit(kind="vacuum")
    dyn = DynamicsParams(dt=1e-3, n_steps=10_000, lam=0.1, scheme="exact",
                         snapshot_stride=50)
    rep = classical_oracle.ehrenfest_compare(table, init, dyn,
                                             StreamSpec(seed, 11))
    exact_ok = rep.max_rel <= 1e-9

    # Euler-vs-Euler discrepancy halves when dt halves (same Brownian
    # path: coarse increments are sums of adjacent fine increments).
    # A complex width kernel is required here: for the vacuum kernel the
    # Euler quantum map is exactly conjugate to the classical symplectic
    # Euler step, leaving only rounding noise.
    init_em = KernelInit(kind="scaled", scale=1.5 - 0.4j)
    n_fine = 2 * dyn.n_steps
    fine_p, fine_s = sample_block(table, dyn.dt / 2.0, StreamSpec(seed, 12),
                                  0, n_fine)
    coarse_p = fine_p[0::2] + fine_p[1::2]
    coarse_s = fine_s[0::2] + fine_s[1::2]
    discs = []
    for scheme_steps, (npair, nsc), stride in (
            (dyn.n_steps, (coarse_p, coarse_s), 50),
            (n_fine, (fine_p, fine_s), 100)):
        dt = 10.0 / scheme_steps
        dyn_em = DynamicsParams(dt=dt, n_steps=scheme_steps, lam=0.1,
                                scheme="euler", snapshot_stride=stride)
        q = run_batch(table, init_em, dyn_em, noise=(npair[None], nsc[None]))
        c = classical_oracle.run_classical(
            table, dyn_em, noise=(npair[None], nsc[None]))
        rep_em = classical_oracle.ehrenfest_compare(
            table, init_em, dyn_em, StreamSpec(seed, 12), quantum=q,
            classical=c)
        discs.append(rep_em.max_abs)
    ratio = discs[0] / discs[1]
    ratio_ok = 1.8 <= ratio <= 2.2
    return CriterionResult(
        5, "Ehrenfest correspondence", exact_ok and ratio_ok,
        f"max rel {rep.max_rel:.2e} (tol 1e-09), EM halving ratio "
        f"{ratio:.3f} (2 +/- 0.2)")


# --- 6: vacuum energy and E0 conservation ----------------------------------------

def criterion_06(seed: int = DEFAULT_SEED) -> CriterionResult:
    spec = LatticeSpec(dim=1, sites_per_dim=8, box_length=8.0, mass=1.0)
    table = build_mode_table(spec)
    state0 = initial_state(table, KernelInit(kind="vacuum"))
    e0 = observables.energy_free(table, state0)
    ref = float(np.sum(table.energies) / 2.0)
    vac_dev = abs(e0 - ref) / ref
    vac_ok = vac_dev <= 1e-12

    init = KernelInit(kind="scaled", scale=1.3 - 0.6j)
    dyn = DynamicsParams(dt=2e-3, n_steps=2500, lam=0.25, scheme="exact",
                         snapshot_stride=25)
    res = run_batch(table, init, dyn, streams=[StreamSpec(seed, 21)])
    en = observables.energy_series(table, res.v_pair, res.v_sc,
                                   res.mu_plus, res.mu_minus, res.mu_sc)
    drift = float(np.max(np.abs(en["e0"] - en["e0"][0])) / abs(en["e0"][0]))
    drift_ok = drift <= 1e-10
    return CriterionResult(
        6, "vacuum energy and E0 conservation", vac_ok and drift_ok,
        f"vacuum dev {vac_dev:.2e} (tol 1e-12), E0 drift {drift:.2e} "
        f"(tol 1e-10)")


# --- 7: linear energy production ------------------------------------------------

def criterion_07(seed: int = DEFAULT_SEED, workers: int | None = None
                 ) -> CriterionResult:
    results = {}
    for sites in (8, 16):
        spec = LatticeSpec(dim=1, sites_per_dim=sites, box_length=8.0,
                           mass=1.0)
        table = build_mode_table(spec)
        e_max = float(np.max(table.energies))
        n_steps = int(np.ceil(10.0 / (0.01 / e_max)))
        dyn = DynamicsParams(dt=10.0 / n_steps, n_steps=n_steps, lam=0.1,
                             scheme="exact",
                             snapshot_stride=max(1, n_steps // 200))
        init = KernelInit(kind="vacuum")
        stats = ensemble.run_ensemble(table, init, dyn, 4000, seed,
                                      workers=workers)
        slope, se = stats.slope("slope_E_total")
        expected = 0.1 ** 2 * table.n_modes / 2.0
        results[sites] = (slope, se, expected, abs(slope - expected) / se)
    ok = all(z <= 3.0 for _, _, _, z in results.values())
    s8, s16 = results[8], results[16]
    return CriterionResult(
        7, "energy production rate (UV doubling)", ok,
        f"N=8: slope {s8[0]:.5f} want {s8[2]:.2f} z={s8[3]:.2f}; "
        f"N=16: slope {s16[0]:.5f} want {s16[2]:.2f} z={s16[3]:.2f} (3 SE)")


# --- 8: Lindblad heating rate ----------------------------------------------------

def criterion_08(seed: int = DEFAULT_SEED) -> CriterionResult:
    lam = 0.2
    expected = lam ** 2 / 2.0
    worst_rel = 0.0
    worst_trace = 0.0
    t_max = 20.0
    for e in (0.5, 1.0, 2.0):
        gen = lindblad_oracle.build_generator(e, lam, n_max=60)
        series = lindblad_oracle.integrate(
            lindblad_oracle.vacuum_rho(60), gen,
            lindblad_oracle.default_step(gen), t_max, stride=200)
        fit = ensemble.fit_linear(series.t, series.energy)
        worst_rel = max(worst_rel, abs(fit.slope - expected) / expected)
        worst_trace = max(worst_trace,
                          float(np.max(np.abs(series.trace_err))) / t_max)
    ok = worst_rel <= 1e-3 and worst_trace <= 1e-10
    return CriterionResult(
        8, "Lindblad heating rate", ok,
        f"slope rel err {worst_rel:.2e} (tol 1e-03), trace drift/t "
        f"{worst_trace:.2e} (tol 1e-10)")


# --- 9: unraveling vs master equation --------------------------------------------

def criterion_09(seed: int = DEFAULT_SEED, workers: int | None = None
                 ) -> CriterionResult:
    spec = LatticeSpec(dim=1, sites_per_dim=2, box_length=2.0, mass=1.0)
    table = build_mode_table(spec)
    mode_id = int(table.sc_ids[int(np.argmin(table.sc_energies))])
    e_max = float(np.max(table.energies))
    n_steps = int(np.ceil(6.0 / (0.01 / e_max)))
    dyn = DynamicsParams(dt=6.0 / n_steps, n_steps=n_steps, lam=0.2,
                         scheme="exact",
                         snapshot_stride=max(1, n_steps // 12))
    report = lindblad_oracle.unraveling_consistency(
        table, KernelInit(kind="vacuum"), dyn, mode_id,
        n_traj=10_000, master_seed=seed, n_max=60, workers=workers)
    return CriterionResult(
        9, "unraveling vs master equation", report.passed,
        f"max z {report.max_z:.2f} over {len(report.times)} times "
        f"(tol 3.0), mode E={report.e:.3f}")


# --- 10: mu-correlator quadrature predictions ------------------------------------

def criterion_10(seed: int = DEFAULT_SEED, workers: int | None = None
                 ) -> CriterionResult:
    spec = LatticeSpec(dim=1, sites_per_dim=4, box_length=4.0, mass=1.0)
    table = build_mode_table(spec)
    lam = 0.3
    init = KernelInit(kind="scaled", scale=1.4 - 0.35j)
    dyn = DynamicsParams(dt=0.0025, n_steps=1600, lam=lam, scheme="exact",
                         snapshot_stride=100)
    stats = ensemble.run_ensemble(table, init, dyn, 4000, seed,
                                  workers=workers)

    # exact vacuum prediction pins the quadrature normalization
    kappa = table.spec.quad_weight
    t_ref = 2.5
    _, abs2_vac = observables.ensemble_mu_correlators(
        KernelInit(kind="vacuum"), table, int(table.pair_plus[0]), lam, t_ref)
    vac_ref = lam ** 2 * t_ref / kappa
    vac_dev = abs(abs2_vac - vac_ref) / vac_ref
    vac_ok = vac_dev <= 1e-12

    check_ids = [int(table.pair_plus[0]), int(table.sc_ids[0])]
    snap_idx = [4, 8, 12, 16]
    worst_z = 0.0
    for mid in check_ids:
        m_abs, se_abs = stats.series(f"mu_abs2[{mid}]")
        m_re, se_re = stats.series(f"mu_prod_re[{mid}]")
        m_im, se_im = stats.series(f"mu_prod_im[{mid}]")
        for k in snap_idx:
            t = float(stats.times[k])
            prod, abs2 = observables.ensemble_mu_correlators(
                init, table, mid, lam, t)
            worst_z = max(
                worst_z,
                abs(m_abs[k] - abs2) / se_abs[k],
                abs(m_re[k] - prod.real) / se_re[k],
                abs(m_im[k] - prod.imag) / max(se_im[k], 1e-300))
    ok = vac_ok and worst_z <= 5.0
    return CriterionResult(
        10, "mu-correlator quadrature predictions", ok,
        f"vacuum dev {vac_dev:.1e} (tol 1e-12), max z {worst_z:.2f} (tol 5)")


# --- 11: noise cancellation in mu+* + mu- ----------------------------------------

def criterion_11(seed: int = DEFAULT_SEED) -> CriterionResult:
    spec = LatticeSpec(dim=1, sites_per_dim=4, box_length=4.0, mass=1.0)
    table = build_mode_table(spec)
    init = KernelInit(kind="vacuum")
    lam = 0.3
    t_star = 1.0
    m_traj = 800
    variances = []
    dts = (1e-2, 1e-3, 1e-4)
    for dt in dts:
        n_steps = int(round(t_star / dt)) + 1
        dyn = DynamicsParams(dt=dt, n_steps=n_steps, lam=lam, scheme="exact",
                             snapshot_stride=n_steps - 1)
        deltas = []
        for lo in range(0, m_traj, 200):
            streams = [StreamSpec(seed, 1000 + i)
                       for i in range(lo, min(lo + 200, m_traj))]
            res = run_batch(table, init, dyn, streams=streams)
            k1 = np.conj(res.mu_plus[:, -2, 0]) + res.mu_minus[:, -2, 0]
            k2 = np.conj(res.mu_plus[:, -1, 0]) + res.mu_minus[:, -1, 0]
            deltas.append(k2 - k1)
        delta = np.concatenate(deltas)
        variances.append(float(np.var(delta.real, ddof=1)
                               + np.var(delta.imag, ddof=1)))
    slope = np.polyfit(np.log(dts), np.log(variances), 1)[0]
    ok = abs(slope - 2.0) <= 0.1
    return CriterionResult(
        11, "noise cancellation in mu+* + mu-", ok,
        f"log-log slope {slope:.3f} (2.0 +/- 0.1)")


CRITERIA = [
    criterion_01, criterion_02, criterion_03, criterion_04, criterion_05,
    criterion_06, criterion_07, criterion_08, criterion_09, criterion_10,
    criterion_11,
]


def run_battery(seed: int = DEFAULT_SEED, quiet: bool = False,
                workers: int | None = None) -> list[CriterionResult]:
    """Run all acceptance criteria, printing a table as results arrive."""
    warmup()
    results = []
    for fn in CRITERIA:
        t0 = time.monotonic()
        try:
            code = fn.__code__
            params = code.co_varnames[:code.co_argcount]
            res = fn(seed, workers=workers) if "workers" in params \
                else fn(seed)
        except WnfieldError as exc:
            num = int(fn.__name__.split("_")[1])
            res = CriterionResult(num, fn.__name__, False,
                                  f"error: {exc}")
        res.passed = bool(res.passed)
        res.runtime = time.monotonic() - t0
        results.append(res)
        if not quiet:
            print(res.line(), flush=True)
    n_pass = sum(r.passed for r in results)
    if not quiet:
        print(f"{n_pass}/{len(results)} criteria passed", flush=True)
    return results
