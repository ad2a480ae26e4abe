"""Quick invariant checks runnable from the command line (``fracfga selftest``)."""
from __future__ import annotations

import math

import numpy as np

from .config import RunConfig
from .fbi import build_phase_mesh, fbi_minus, fbi_minus_adjoint
from .flow import initial_state, integrate_trajectory, symplectic_defect, z_matrix
from .grid import Grid, WaveField
from .spectral import run_reference
from .symbols import KineticModel, PotentialModel, SymbolSet, kinetic_grad, kinetic_value


def _ex1d(eps):
    grid = Grid.uniform(((0.0, 2.0),), eps)
    x = grid.axes[0]
    return WaveField(grid, math.sqrt(64 / math.pi) * np.exp(-64 * (x - 1) ** 2) * np.exp(1j * x / eps))


def check_fbi(eps=2.0 ** -6):
    psi = _ex1d(eps)
    mesh = build_phase_mesh(psi, eps)
    g = fbi_minus(psi, mesh, eps)
    iso = abs(math.sqrt(np.sum(np.abs(g) ** 2) * mesh.cell_volume) / psi.norm() - 1.0)
    back = fbi_minus_adjoint(g, mesh, eps, psi.grid)
    rt = np.linalg.norm(back.values - psi.values) / np.linalg.norm(psi.values)
    return [("fbi isometry", iso, 1e-4), ("fbi round trip", rt, 1e-3)]


def check_flow(n=100, seed=0, alpha=1.5):
    rng = np.random.default_rng(seed)
    q = rng.uniform(0.6, 1.4, (n, 1))
    p = rng.uniform(0.2, 1.8, (n, 1))
    eps = 2.0 ** -6
    sym = SymbolSet(KineticModel(alpha, eps), PotentialModel("Cosine1D"))
    s = integrate_trajectory(initial_state(q, p), 0.25, 1e-3, sym)
    detz = np.linalg.det(z_matrix(s.F))
    ratio2 = np.exp(2.0 * (s.log_A - math.log(2 ** 0.5)))
    amp = np.max(np.abs(ratio2 - detz / 2) / np.abs(detz / 2))
    dH = np.max(np.abs(sym.hamiltonian(s.Q, s.P) - sym.hamiltonian(q, p)))
    sandwich = np.max(np.maximum(np.abs(s.P[:, 0]) - (np.abs(p[:, 0]) + math.pi * 0.25),
                                 (np.abs(p[:, 0]) - math.pi * 0.25) - np.abs(s.P[:, 0])))
    return [("symplectic defect", float(s.max_defect.max()), 1e-6),
            ("det Z lower bound deficit", max(0.0, 2 ** 0.5 - float(s.min_abs_det_z.min())), 1e-9),
            ("amplitude-determinant identity", float(amp), 1e-6),
            ("energy drift", float(dH), 1e-6),
            ("momentum sandwich violation", max(0.0, float(sandwich)), 1e-12)]


def check_spectral():
    eps = 2.0 ** -6
    psi = _ex1d(eps)
    ref = run_reference(psi, PotentialModel("Cosine1D"), eps, 1.5, 0.25)
    drift = abs(ref.norm() / psi.norm() - 1.0)
    return [("spectral norm drift", drift, 1e-10)]


def check_symbols():
    rng = np.random.default_rng(1)
    worst = 0.0
    for delta in (0.0, 0.1):
        model = KineticModel(1.3, delta)
        for _ in range(20):
            p = rng.uniform(-5, 5, 2)
            p *= rng.uniform(0.1, 5) / np.linalg.norm(p)
            h = 1e-6
            fd = np.array([(kinetic_value(p + h * e, model) - kinetic_value(p - h * e, model)) / (2 * h)
                           for e in np.eye(2)])
            g = kinetic_grad(p, model)
            worst = max(worst, np.max(np.abs(fd - g)) / np.max(np.abs(g)))
    return [("kinetic gradient vs finite differences", worst, 1e-6)]


def run_all(stream=None):
    """Run every check; returns ``True`` when all pass."""
    ok = True
    for check in (check_symbols, check_flow, check_fbi, check_spectral):
        for name, value, tol in check():
            passed = value <= tol
            ok &= passed
            line = f"{'PASS' if passed else 'FAIL'}  {name:<40s} {value:.3e} (tol {tol:.0e})"
            print(line, file=stream)
    return ok
