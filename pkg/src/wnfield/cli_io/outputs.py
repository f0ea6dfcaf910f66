"""Run outputs: RFC-4180 CSV files, JSON reports, and a manifest.

Floats are serialized with repr (shortest round-trip form), so replaying
a CSV reproduces the binary values exactly.  Writes are atomic (temp
file + rename) and the manifest records a sha256 per artifact.  Nothing
here embeds timestamps: re-running a run with the same seed must produce
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile

import numpy as np

from ..classical_oracle import ClassicalTrajectory
from ..ensemble import EnsembleStats
from ..kernel_engine import TrajectoryResult
from ..lattice import CLASS_NAMES, ModeTable
from ..lindblad_oracle import LindbladSeries
from ..observables import energy_series


def _f(x) -> str:
    return repr(float(x))


def _atomic_write(path: str, write_fn) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)),
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows) -> None:
    def go(fh):
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    _atomic_write(path, go)


def write_json(path: str, payload: dict) -> None:
    _atomic_write(path, lambda fh: fh.write(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"))


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --- per-file writers -----------------------------------------------------------

def write_mode_table_csv(path: str, table: ModeTable) -> None:
    dim = table.spec.dim
    header = (["mode_id"] + [f"n_{i}" for i in range(dim)]
              + [f"p_{i}" for i in range(dim)]
              + ["E_p", "class", "partner_id"])
    rows = []
    for i in range(table.n_modes):
        rows.append([str(i)]
                    + [str(int(v)) for v in table.index_vectors[i]]
                    + [_f(v) for v in table.momenta[i]]
                    + [_f(table.energies[i]),
                       CLASS_NAMES[int(table.kind[i])],
                       str(int(table.partner[i]))])
    write_csv(path, header, rows)


def write_snapshots_csv(path: str, res: TrajectoryResult, b: int = 0) -> None:
    """One row per snapshot per stored mode (pair-plus rows carry both
    partners; self-conjugate rows repeat mu in both columns)."""
    table = res.table
    header = ["t", "mode_id", "V_re", "V_im", "mu_plus_re", "mu_plus_im",
              "mu_minus_re", "mu_minus_im"]
    rows = []
    for k, t in enumerate(res.times):
        ts = _f(t)
        for j, mid in enumerate(table.pair_plus):
            v = res.v_pair[k, j]
            mp = res.mu_plus[b, k, j]
            mm = res.mu_minus[b, k, j]
            rows.append([ts, str(int(mid)), _f(v.real), _f(v.imag),
                         _f(mp.real), _f(mp.imag), _f(mm.real), _f(mm.imag)])
        for j, mid in enumerate(table.sc_ids):
            v = res.v_sc[k, j]
            ms = res.mu_sc[b, k, j]
            rows.append([ts, str(int(mid)), _f(v.real), _f(v.imag),
                         _f(ms.real), _f(ms.imag), _f(ms.real), _f(ms.imag)])
    write_csv(path, header, rows)


def write_observables_csv(path: str, res: TrajectoryResult,
                          b: int = 0) -> None:
    table = res.table
    en = energy_series(table, res.v_pair, res.v_sc,
                       res.mu_plus, res.mu_minus, res.mu_sc)
    vol = table.spec.volume
    rows = []
    for k, t in enumerate(res.times):
        e0 = en["e0"][k]
        e1 = en["e1"][b, k]
        rows.append([_f(t), _f(e0), _f(e1), _f(e0 + e1),
                     _f((e0 + e1) / vol)])
    write_csv(path, ["t", "E0", "E1", "E_total", "E_density"], rows)


def write_fields_csv(path: str, res: TrajectoryResult, b: int = 0) -> None:
    """Field expectation and per-quadrature variance for every mode id."""
    table = res.table
    kappa = table.spec.quad_weight
    rows = []
    header = ["t", "mode_id", "phi_q_re", "phi_q_im", "variance"]
    n = table.n_modes
    for k, t in enumerate(res.times):
        phi = np.zeros(n, dtype=np.complex128)
        var = np.zeros(n)
        vrp = res.v_pair[k].real
        vrs = res.v_sc[k].real
        cp = (np.conj(res.mu_plus[b, k]) + res.mu_minus[b, k]) / (2.0 * vrp)
        phi[table.pair_plus] = cp
        phi[table.pair_minus] = np.conj(cp)
        phi[table.sc_ids] = res.mu_sc[b, k].real / vrs
        var[table.pair_plus] = 1.0 / (4.0 * kappa * vrp)
        var[table.pair_minus] = var[table.pair_plus]
        var[table.sc_ids] = 1.0 / (2.0 * kappa * vrs)
        ts = _f(t)
        for mid in range(n):
            rows.append([ts, str(mid), _f(phi[mid].real), _f(phi[mid].imag),
                         _f(var[mid])])
    write_csv(path, header, rows)


def write_classical_csv(path: str, traj: ClassicalTrajectory,
                        b: int = 0) -> None:
    table = traj.table
    header = ["t", "mode_id", "phi_re", "phi_im", "pi_re", "pi_im"]
    rows = []
    n = table.n_modes
    for k, t in enumerate(traj.times):
        phi = np.zeros(n, dtype=np.complex128)
        pi = np.zeros(n, dtype=np.complex128)
        phi[table.pair_plus] = traj.phi_pair[b, k]
        phi[table.pair_minus] = np.conj(traj.phi_pair[b, k])
        pi[table.pair_plus] = traj.pi_pair[b, k]
        pi[table.pair_minus] = np.conj(traj.pi_pair[b, k])
        phi[table.sc_ids] = traj.phi_sc[b, k]
        pi[table.sc_ids] = traj.pi_sc[b, k]
        ts = _f(t)
        for mid in range(n):
            rows.append([ts, str(mid), _f(phi[mid].real), _f(phi[mid].imag),
                         _f(pi[mid].real), _f(pi[mid].imag)])
    write_csv(path, header, rows)


def write_lindblad_csv(path: str, series: LindbladSeries) -> None:
    rows = [[_f(t), _f(e), _f(x), _f(x2), _f(tr), _f(me)]
            for t, e, x, x2, tr, me in zip(
                series.t, series.energy, series.x_mean, series.x2_mean,
                series.trace_err, series.min_eig)]
    write_csv(path, ["t", "energy", "x_mean", "x2_mean", "trace_err",
                     "min_eig"], rows)


def write_ensemble_csv(path: str, stats: EnsembleStats) -> None:
    se = stats.moments.stderr()
    m = str(stats.n_traj)
    rows = []
    for k, t in enumerate(stats.times):
        ts = _f(t)
        for j, name in enumerate(stats.names):
            rows.append([ts, name, _f(stats.moments.mean[k, j]),
                         _f(se[k, j]), m])
    write_csv(path, ["t", "observable", "mean", "stderr", "M"], rows)


def write_fit_json(path: str, slope: float, stderr: float,
                   expected_slope: float) -> dict:
    z = (slope - expected_slope) / stderr if stderr > 0 else float("inf")
    payload = {
        "slope": slope,
        "stderr": stderr,
        "expected_slope": expected_slope,
        "z_score": z,
    }
    write_json(path, payload)
    return payload


def write_compare_json(path: str, max_discrepancy: float, t_at: float,
                       mode_slot: int, scale: float) -> dict:
    payload = {
        "max_discrepancy": max_discrepancy,
        "argmax": {"t": t_at, "mode_slot": mode_slot},
        "scale": scale,
    }
    write_json(path, payload)
    return payload


def write_manifest(out_dir: str, config_dict: dict, extra: dict | None = None,
                   name: str = "manifest.json") -> str:
    """Checksum every artifact in out_dir into a manifest."""
    files = {}
    for fn in sorted(os.listdir(out_dir)):
        full = os.path.join(out_dir, fn)
        if fn == name or not os.path.isfile(full):
            continue
        files[fn] = {
            "sha256": sha256_file(full),
            "bytes": os.path.getsize(full),
        }
    from .. import __version__
    from .._accel import BACKEND
    payload = {
        "config": config_dict,
        "package_version": __version__,
        "backend": BACKEND,
        "files": files,
    }
    if extra:
        payload.update(extra)
    path = os.path.join(out_dir, name)
    write_json(path, payload)
    return path


def write_noise_csv(path: str, table: ModeTable,
                    pair: np.ndarray, sc: np.ndarray) -> None:
    """Noise increments, one row per slice per stored mode."""
    rows = []
    n_slices = pair.shape[0] if table.n_pairs else sc.shape[0]
    for k in range(n_slices):
        ks = str(k)
        for j, mid in enumerate(table.pair_plus):
            w = pair[k, j]
            rows.append([ks, str(int(mid)), _f(w.real), _f(w.imag)])
        for j, mid in enumerate(table.sc_ids):
            rows.append([ks, str(int(mid)), _f(sc[k, j]), _f(0.0)])
    write_csv(path, ["slice_index", "mode_id", "re", "im"], rows)


def read_noise_csv(path: str, table: ModeTable):
    """Inverse of write_noise_csv; returns (pair, sc) arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["slice_index", "mode_id", "re", "im"]:
            raise ValueError(f"{path}: unexpected noise csv header {header}")
        raw = [(int(r[0]), int(r[1]), float(r[2]), float(r[3]))
               for r in reader]
    if not raw:
        return (np.zeros((0, table.n_pairs), dtype=np.complex128),
                np.zeros((0, table.n_sc)))
    n_slices = max(r[0] for r in raw) + 1
    pair = np.zeros((n_slices, table.n_pairs), dtype=np.complex128)
    sc = np.zeros((n_slices, table.n_sc))
    pair_slot = {int(mid): j for j, mid in enumerate(table.pair_plus)}
    sc_slot = {int(mid): j for j, mid in enumerate(table.sc_ids)}
    for k, mid, re, im in raw:
        if mid in pair_slot:
            pair[k, pair_slot[mid]] = re + 1j * im
        elif mid in sc_slot:
            sc[k, sc_slot[mid]] = re
        else:
            raise ValueError(f"{path}: mode_id {mid} is not a stored mode")
    return pair, sc
