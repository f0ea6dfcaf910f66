"""Ensemble statistics: Welford accumulation, worker determinism, slope fits."""

import numpy as np
import pytest

from wnfield import (DynamicsParams, EnsembleAborted, KernelInit,
                     KernelSingularError, LatticeSpec, build_mode_table,
                     fit_linear, run_ensemble)
from wnfield.ensemble import RunningMoments, default_workers, observable_names

SEED = 20260817


def small_dyn(lam=0.2, n_steps=40, stride=10):
    return DynamicsParams(dt=0.02, n_steps=n_steps, lam=lam,
                          snapshot_stride=stride)


def test_running_moments_against_numpy(rng):
    samples = rng.standard_normal((100, 7))
    acc = RunningMoments((7,))
    for s in samples:
        acc.add(s)
    np.testing.assert_allclose(acc.mean, samples.mean(axis=0), rtol=1e-13)
    np.testing.assert_allclose(acc.variance(), samples.var(axis=0, ddof=1),
                               rtol=1e-12)
    np.testing.assert_allclose(
        acc.stderr(), samples.std(axis=0, ddof=1) / 10.0, rtol=1e-12)


def test_running_moments_merge_matches_single_pass(rng):
    samples = rng.standard_normal((101, 3))
    full = RunningMoments((3,))
    for s in samples:
        full.add(s)
    left, right = RunningMoments((3,)), RunningMoments((3,))
    for s in samples[:37]:
        left.add(s)
    for s in samples[37:]:
        right.add(s)
    left.merge(right)
    assert left.count == 101
    np.testing.assert_allclose(left.mean, full.mean, rtol=1e-13)
    np.testing.assert_allclose(left.variance(), full.variance(), rtol=1e-12)


def test_running_moments_undefined_below_two_samples():
    acc = RunningMoments((2,))
    acc.add(np.zeros(2))
    assert np.all(np.isnan(acc.variance()))


def test_quiet_ensemble_has_zero_spread(table4):
    """lam = 0 makes every trajectory identical: all variances vanish."""
    stats = run_ensemble(table4, KernelInit(kind="vacuum"),
                         small_dyn(lam=0.0), n_traj=8, master_seed=SEED)
    for name in ("E1", "E_total"):
        mean, se = stats.series(name)
        assert np.all(se == 0.0)
    mean, se = stats.series("E1")
    assert np.all(mean == 0.0)
    slope, sse = stats.slope("slope_E1")
    assert slope == 0.0 and sse == 0.0


def test_worker_count_does_not_change_bits(table4):
    init = KernelInit(kind="scaled", scale=1.4 - 0.3j)
    results = []
    for workers in (1, 3):
        stats = run_ensemble(table4, init, small_dyn(), n_traj=150,
                             master_seed=SEED, workers=workers)
        blob = b"".join(
            np.concatenate(stats.series(n)).tobytes()
            for n in observable_names(table4))
        blob += np.float64(stats.slope("slope_E_total")[0]).tobytes()
        results.append(blob)
    assert results[0] == results[1]


def test_stderr_scales_inverse_sqrt_m():
    table = build_mode_table(
        LatticeSpec(dim=1, sites_per_dim=2, box_length=2.0, mass=1.0))
    init = KernelInit(kind="vacuum")
    dyn = DynamicsParams(dt=0.05, n_steps=20, lam=0.5, snapshot_stride=20)
    ses = []
    for m in (256, 1024, 4096):
        stats = run_ensemble(table, init, dyn, n_traj=m, master_seed=SEED)
        _, se = stats.series("E1")
        ses.append(float(se[-1]))
    assert ses[0] / ses[1] == pytest.approx(2.0, abs=0.4)
    assert ses[1] / ses[2] == pytest.approx(2.0, abs=0.4)


def test_fit_linear_exact_line():
    t = np.linspace(0.0, 4.0, 9)
    fit = fit_linear(t, 3.0 * t + 1.0)
    assert fit.slope == pytest.approx(3.0, rel=1e-14)
    assert fit.intercept == pytest.approx(1.0, rel=1e-13)
    assert fit.slope_se == pytest.approx(0.0, abs=1e-13)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-15)


def test_fit_linear_noisy_line(rng):
    t = np.linspace(0.0, 1.0, 1000)
    y = t + 0.1 * rng.standard_normal(1000)
    fit = fit_linear(t, y)
    assert abs(fit.slope - 1.0) < 3.0 * fit.slope_se
    assert fit.slope_se == pytest.approx(
        0.1 / np.sqrt(np.sum((t - t.mean()) ** 2)), rel=0.15)


def test_fit_linear_constant_data():
    t = np.linspace(0.0, 1.0, 5)
    fit = fit_linear(t, np.full(5, 2.5))
    assert fit.slope == 0.0
    assert fit.intercept == 2.5
    assert fit.r_squared == 1.0


def test_fit_linear_weighted_pins_confident_points():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    y = np.array([0.0, 1.0, 2.0, 10.0])
    se = np.array([1e-3, 1e-3, 1e-3, 1e3])
    fit = fit_linear(t, y, se=se)
    assert fit.slope == pytest.approx(1.0, abs=1e-4)
    # weighted slope SE is sqrt(1/sxx) from the stated uncertainties
    w = 1.0 / se ** 2
    xm = (w * t).sum() / w.sum()
    sxx = (w * (t - xm) ** 2).sum()
    assert fit.slope_se == pytest.approx(np.sqrt(1.0 / sxx), rel=1e-12)


def test_fit_linear_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_linear([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_linear([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        fit_linear([0.0, 1.0, 2.0], [1.0, 2.0, 3.0],
                   se=np.array([1.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        fit_linear(np.zeros((2, 2)), np.zeros((2, 2)))


def test_n_traj_must_be_positive(table4):
    with pytest.raises(ValueError):
        run_ensemble(table4, KernelInit(kind="vacuum"), small_dyn(),
                     n_traj=0, master_seed=SEED)


def test_worker_env_override(monkeypatch):
    monkeypatch.setenv("WNFIELD_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("WNFIELD_THREADS", "0")
    with pytest.raises(ValueError):
        default_workers()
    monkeypatch.delenv("WNFIELD_THREADS")
    assert default_workers() >= 1


def test_failed_trajectory_aborts_ensemble(table4):
    """A width caustic inside any trajectory abandons the whole run."""
    t_sing = np.pi / 2.0  # zero kernel, E = 1 self-conjugate mode
    dyn = DynamicsParams(dt=t_sing / 10.0, n_steps=12, lam=0.1,
                         snapshot_stride=12)
    with pytest.raises(EnsembleAborted) as err:
        run_ensemble(table4, KernelInit(kind="zero"), dyn, n_traj=5,
                     master_seed=SEED)
    assert err.value.trajectory_id == 0
    assert isinstance(err.value.cause, KernelSingularError)
