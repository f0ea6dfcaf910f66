"""Acceptance battery: every cross-oracle criterion at its stated tolerance.

Each test drives one criterion from wnfield.cli_io.verify (the same
functions behind `wnfield verify`), prints its one-line PASS/FAIL
summary, and enforces a wall-clock budget on this reference hardware.
"""

import time

import pytest

from wnfield.cli_io import verify

SEED = verify.DEFAULT_SEED


@pytest.fixture(scope="module", autouse=True)
def compiled_kernels():
    verify.warmup()


def run(fn, cap_s, workers=False):
    t0 = time.perf_counter()
    result = fn(SEED, workers=None) if workers else fn(SEED)
    result.runtime = time.perf_counter() - t0
    print(result.line())
    assert result.passed, result.measured
    assert result.runtime < cap_s, \
        f"criterion {result.number} took {result.runtime:.1f}s (cap {cap_s}s)"
    return result


def test_criterion_01_riccati_vs_rk4_oracle():
    run(verify.criterion_01, 5)


def test_criterion_02_kernel_special_cases():
    run(verify.criterion_02, 1)


def test_criterion_03_propagator_vs_quadrature():
    run(verify.criterion_03, 5)


def test_criterion_04_noise_statistics_and_determinism():
    run(verify.criterion_04, 30)


def test_criterion_05_ehrenfest_correspondence():
    run(verify.criterion_05, 30)


def test_criterion_06_vacuum_energy_and_e0_conservation():
    run(verify.criterion_06, 1)


def test_criterion_07_energy_production_rate():
    run(verify.criterion_07, 300, workers=True)


def test_criterion_08_lindblad_heating_rate():
    run(verify.criterion_08, 60)


def test_criterion_09_unraveling_vs_master_equation():
    run(verify.criterion_09, 180, workers=True)


def test_criterion_10_mu_correlator_predictions():
    run(verify.criterion_10, 120, workers=True)


def test_criterion_11_noise_cancellation_scaling():
    run(verify.criterion_11, 60)
