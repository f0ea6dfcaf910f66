"""Hot step loops, compiled with numba when available.

Every kernel works on a batch of trajectories at once: state arrays have
shape (batch, modes), per-step coefficient arrays (n_steps, modes), and
noise arrays (batch, n_steps, modes).  Snapshots are recorded into
preallocated (batch, n_snap, modes) outputs at the step indices listed
in snap (sorted, may start at 0 for the initial state).

Propagator ratios and V values are precomputed by the caller in numpy,
so both backends execute the same multiply-add sequence and produce
bit-identical results.  Selection: numba when importable, else numpy;
set WNFIELD_BACKEND=numpy or =numba to force (forcing numba raises if
it cannot be imported).
"""

from __future__ import annotations

import os

import numpy as np

_FORCED = os.environ.get("WNFIELD_BACKEND", "").strip().lower()
if _FORCED not in ("", "numpy", "numba"):
    raise RuntimeError(
        f"WNFIELD_BACKEND must be 'numpy' or 'numba', got {_FORCED!r}")


# --- scalar-loop implementations (numba-compilable) -------------------------

def _record(mup, mum, mus, out_p, out_m, out_s, si):
    batch, n_p = mup.shape
    n_s = mus.shape[1]
    for b in range(batch):
        for j in range(n_p):
            out_p[b, si, j] = mup[b, j]
            out_m[b, si, j] = mum[b, j]
        for j in range(n_s):
            out_s[b, si, j] = mus[b, j]


def _mu_scan_exact(prop_p, prop_s, dw_p, dw_s, lam,
                   mup, mum, mus, snap, out_p, out_m, out_s):
    batch, n_p = mup.shape
    n_s = mus.shape[1]
    n_steps = prop_p.shape[0]
    n_snap = snap.shape[0]
    il = 1j * lam
    si = 0
    if n_snap > 0 and snap[0] == 0:
        _record(mup, mum, mus, out_p, out_m, out_s, 0)
        si = 1
    for k in range(n_steps):
        for b in range(batch):
            for j in range(n_p):
                w = dw_p[b, k, j]
                g = prop_p[k, j]
                mup[b, j] = g * (mup[b, j] + il * w)
                mum[b, j] = g * (mum[b, j] + il * w.conjugate())
            for j in range(n_s):
                mus[b, j] = prop_s[k, j] * (mus[b, j] + il * dw_s[b, k, j])
        if si < n_snap and snap[si] == k + 1:
            _record(mup, mum, mus, out_p, out_m, out_s, si)
            si += 1


def _mu_scan_euler(v_p, v_s, dt, dw_p, dw_s, lam,
                   mup, mum, mus, snap, out_p, out_m, out_s):
    batch, n_p = mup.shape
    n_s = mus.shape[1]
    n_steps = v_p.shape[0]
    n_snap = snap.shape[0]
    il = 1j * lam
    mdt = -1j * dt
    si = 0
    if n_snap > 0 and snap[0] == 0:
        _record(mup, mum, mus, out_p, out_m, out_s, 0)
        si = 1
    for k in range(n_steps):
        for b in range(batch):
            for j in range(n_p):
                w = dw_p[b, k, j]
                v = v_p[k, j]
                mup[b, j] = mup[b, j] + mdt * mup[b, j] * v + il * w
                mum[b, j] = mum[b, j] + mdt * mum[b, j] * v + il * w.conjugate()
            for j in range(n_s):
                v = v_s[k, j]
                mus[b, j] = mus[b, j] + mdt * mus[b, j] * v + il * dw_s[b, k, j]
        if si < n_snap and snap[si] == k + 1:
            _record(mup, mum, mus, out_p, out_m, out_s, si)
            si += 1


def _classical_record(php, pip_, phs, pis, out_php, out_pip, out_phs, out_pis, si):
    batch, n_p = php.shape
    n_s = phs.shape[1]
    for b in range(batch):
        for j in range(n_p):
            out_php[b, si, j] = php[b, j]
            out_pip[b, si, j] = pip_[b, j]
        for j in range(n_s):
            out_phs[b, si, j] = phs[b, j]
            out_pis[b, si, j] = pis[b, j]


def _classical_scan_exact(cos_p, sinc_p, esin_p, cos_s, sinc_s, esin_s,
                          dw_p, dw_s, lam, php, pip_, phs, pis, snap,
                          out_php, out_pip, out_phs, out_pis):
    batch, n_p = php.shape
    n_s = phs.shape[1]
    n_steps = dw_p.shape[1]
    n_snap = snap.shape[0]
    si = 0
    if n_snap > 0 and snap[0] == 0:
        _classical_record(php, pip_, phs, pis,
                          out_php, out_pip, out_phs, out_pis, 0)
        si = 1
    for k in range(n_steps):
        for b in range(batch):
            for j in range(n_p):
                # kick by the noise, then rotate through one free period
                p = pip_[b, j] + lam * dw_p[b, k, j].conjugate()
                f = php[b, j]
                php[b, j] = cos_p[j] * f + sinc_p[j] * p
                pip_[b, j] = cos_p[j] * p - esin_p[j] * f
            for j in range(n_s):
                p = pis[b, j] + lam * dw_s[b, k, j]
                f = phs[b, j]
                phs[b, j] = cos_s[j] * f + sinc_s[j] * p
                pis[b, j] = cos_s[j] * p - esin_s[j] * f
        if si < n_snap and snap[si] == k + 1:
            _classical_record(php, pip_, phs, pis,
                              out_php, out_pip, out_phs, out_pis, si)
            si += 1


def _classical_scan_euler(e2_p, e2_s, dt, dw_p, dw_s, lam,
                          php, pip_, phs, pis, snap,
                          out_php, out_pip, out_phs, out_pis):
    batch, n_p = php.shape
    n_s = phs.shape[1]
    n_steps = dw_p.shape[1]
    n_snap = snap.shape[0]
    si = 0
    if n_snap > 0 and snap[0] == 0:
        _classical_record(php, pip_, phs, pis,
                          out_php, out_pip, out_phs, out_pis, 0)
        si = 1
    for k in range(n_steps):
        for b in range(batch):
            for j in range(n_p):
                f = php[b, j]
                p = pip_[b, j]
                php[b, j] = f + dt * p
                pip_[b, j] = p - dt * e2_p[j] * f + lam * dw_p[b, k, j].conjugate()
            for j in range(n_s):
                f = phs[b, j]
                p = pis[b, j]
                phs[b, j] = f + dt * p
                pis[b, j] = p - dt * e2_s[j] * f + lam * dw_s[b, k, j]
        if si < n_snap and snap[si] == k + 1:
            _classical_record(php, pip_, phs, pis,
                              out_php, out_pip, out_phs, out_pis, si)
            si += 1


# --- numpy fallbacks (vectorized over batch and modes) ----------------------

def _np_record(state, out, si):
    for arr, dst in zip(state, out):
        dst[:, si, :] = arr


def _cmul_plain(a, b, out):
    """Complex multiply via real ops: one rounding per mul/add.

    numpy's complex-multiply ufunc contracts into FMA instructions on
    SIMD targets, which rounds differently (by 1 ulp) from the plain
    (ac - bd, ad + bc) sequence that scalar code executes.  Spelling the
    multiply out over real views keeps the numpy fallback bit-identical
    to the compiled backend.  Products with a real or purely imaginary
    factor are unaffected (the fused term is exact), so only general
    complex*complex products route through here.
    """
    ar, ai = a.real, a.imag
    br, bi = b.real, b.imag
    out.real = ar * br - ai * bi
    out.imag = ar * bi + ai * br
    return out


def _mu_scan_exact_np(prop_p, prop_s, dw_p, dw_s, lam,
                      mup, mum, mus, snap, out_p, out_m, out_s):
    n_steps = prop_p.shape[0]
    n_snap = snap.shape[0]
    il = 1j * lam
    si = 0
    if n_snap > 0 and snap[0] == 0:
        _np_record((mup, mum, mus), (out_p, out_m, out_s), 0)
        si = 1
    for k in range(n_steps):
        w = dw_p[:, k, :]
        g = prop_p[k]
        gs = prop_s[k]
        _cmul_plain(g, mup + il * w, mup)
        _cmul_plain(g, mum + il * np.conj(w), mum)
        _cmul_plain(gs, mus + il * dw_s[:, k, :], mus)
        if si < n_snap and snap[si] == k + 1:
            _np_record((mup, mum, mus), (out_p, out_m, out_s), si)
            si += 1


def _mu_scan_euler_np(v_p, v_s, dt, dw_p, dw_s, lam,
                      mup, mum, mus, snap, out_p, out_m, out_s):
    n_steps = v_p.shape[0]
    n_snap = snap.shape[0]
    il = 1j * lam
    mdt = -1j * dt
    si = 0
    if n_snap > 0 and snap[0] == 0:
        _np_record((mup, mum, mus), (out_p, out_m, out_s), 0)
        si = 1
    scratch = np.empty_like(mup)
    scratch_s = np.empty_like(mus)
    for k in range(n_steps):
        w = dw_p[:, k, :]
        vp = v_p[k]
        vs = v_s[k]
        mup[...] = mup + _cmul_plain(mdt * mup, vp, scratch) + il * w
        mum[...] = mum + _cmul_plain(mdt * mum, vp, scratch) \
            + il * np.conj(w)
        mus[...] = mus + _cmul_plain(mdt * mus, vs, scratch_s) \
            + il * dw_s[:, k, :]
        if si < n_snap and snap[si] == k + 1:
            _np_record((mup, mum, mus), (out_p, out_m, out_s), si)
            si += 1


def _classical_scan_exact_np(cos_p, sinc_p, esin_p, cos_s, sinc_s, esin_s,
                             dw_p, dw_s, lam, php, pip_, phs, pis, snap,
                             out_php, out_pip, out_phs, out_pis):
    n_steps = dw_p.shape[1]
    n_snap = snap.shape[0]
    si = 0
    if n_snap > 0 and snap[0] == 0:
        _np_record((php, pip_, phs, pis),
                   (out_php, out_pip, out_phs, out_pis), 0)
        si = 1
    for k in range(n_steps):
        p = pip_ + lam * np.conj(dw_p[:, k, :])
        f = php.copy()
        php[...] = cos_p * f + sinc_p * p
        pip_[...] = cos_p * p - esin_p * f
        ps = pis + lam * dw_s[:, k, :]
        fs = phs.copy()
        phs[...] = cos_s * fs + sinc_s * ps
        pis[...] = cos_s * ps - esin_s * fs
        if si < n_snap and snap[si] == k + 1:
            _np_record((php, pip_, phs, pis),
                       (out_php, out_pip, out_phs, out_pis), si)
            si += 1


def _classical_scan_euler_np(e2_p, e2_s, dt, dw_p, dw_s, lam,
                             php, pip_, phs, pis, snap,
                             out_php, out_pip, out_phs, out_pis):
    n_steps = dw_p.shape[1]
    n_snap = snap.shape[0]
    si = 0
    if n_snap > 0 and snap[0] == 0:
        _np_record((php, pip_, phs, pis),
                   (out_php, out_pip, out_phs, out_pis), 0)
        si = 1
    for k in range(n_steps):
        f = php.copy()
        php[...] = f + dt * pip_
        pip_[...] = pip_ - dt * e2_p * f + lam * np.conj(dw_p[:, k, :])
        fs = phs.copy()
        phs[...] = fs + dt * pis
        pis[...] = pis - dt * e2_s * fs + lam * dw_s[:, k, :]
        if si < n_snap and snap[si] == k + 1:
            _np_record((php, pip_, phs, pis),
                       (out_php, out_pip, out_phs, out_pis), si)
            si += 1


# --- backend selection -------------------------------------------------------

if _FORCED == "numpy":
    BACKEND = "numpy"
else:
    try:
        from numba import njit

        _jit = njit(cache=True, nogil=True)
        _record = _jit(_record)
        _classical_record = _jit(_classical_record)
        mu_scan_exact = _jit(_mu_scan_exact)
        mu_scan_euler = _jit(_mu_scan_euler)
        classical_scan_exact = _jit(_classical_scan_exact)
        classical_scan_euler = _jit(_classical_scan_euler)
        BACKEND = "numba"
    except ImportError:
        if _FORCED == "numba":
            raise RuntimeError(
                "WNFIELD_BACKEND=numba but numba is not importable")
        BACKEND = "numpy"

if BACKEND == "numpy":
    mu_scan_exact = _mu_scan_exact_np
    mu_scan_euler = _mu_scan_euler_np
    classical_scan_exact = _classical_scan_exact_np
    classical_scan_euler = _classical_scan_euler_np
