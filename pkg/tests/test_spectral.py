import math
import warnings

import numpy as np
import pytest

from fracfga.grid import Grid, GridMismatchError, ResolutionError, WaveField
from fracfga.spectral import (BoundaryContaminationWarning, SplitStepPropagator, boundary_mass_fraction,
                              kinetic_phase, run_reference, strang_step)
from fracfga.symbols import PotentialModel

from conftest import ex1d_field

EPS = 2.0 ** -6


def free_gaussian(x, t, eps, p0=1.0, s=1.0 / 128, a=1.0):
    """Exact solution of i psi_t = -(eps/2) psi_xx from a Gaussian packet."""
    k0 = p0 / eps
    st = s + 1j * eps * t
    return np.sqrt(s / st) * np.exp(-(x - a - p0 * t) ** 2 / (2 * st)) * np.exp(1j * k0 * x - 0.5j * eps * k0 ** 2 * t)


class TestKineticPhase:
    def test_zero_mode(self):
        assert kinetic_phase(0.0, EPS, 1.3, 0.1) == 1.0

    def test_alpha_two(self, rng):
        k = rng.uniform(-200, 200, 50)
        dt = 1e-3
        np.testing.assert_allclose(kinetic_phase(k, EPS, 2.0, dt), np.exp(-1j * dt * EPS * k ** 2 / 2), rtol=1e-14)

    def test_unit_modulus(self, rng):
        k = rng.uniform(-500, 500, (2, 100))
        v = kinetic_phase((k[0], k[1]), EPS, 1.37, 3e-3)
        np.testing.assert_allclose(np.abs(v), 1.0, rtol=1e-15)

    def test_vector_norm(self):
        v = kinetic_phase((np.array(3.0), np.array(4.0)), 0.5, 1.5, 1.0)
        assert v == pytest.approx(np.exp(-1j * 0.5 ** 0.5 * 5.0 ** 1.5 / 1.5))


def test_free_gaussian_analytic():
    eps = EPS
    grid = Grid.uniform(((0.0, 2.0),), eps)
    x = grid.axes[0]
    psi = WaveField(grid, free_gaussian(x, 0.0, eps))
    out = run_reference(psi, PotentialModel("Zero", dim=1), eps, 2.0, 0.1, dt=1e-4)
    err = np.linalg.norm(out.values - free_gaussian(x, 0.1, eps)) / np.linalg.norm(psi.values)
    assert err <= 1e-8


def test_constant_potential_is_global_phase():
    eps, c, t = EPS, 0.7, 0.05
    psi = ex1d_field(eps)
    V = PotentialModel("Custom", dim=1, value_fn=lambda x: np.full(x.shape[:-1], c),
                       grad_fn=lambda x: np.zeros_like(x), hess_fn=lambda x: np.zeros(x.shape + (1,)))
    a = run_reference(psi, V, eps, 1.5, t, dt=1e-3)
    b = run_reference(psi, PotentialModel("Zero", dim=1), eps, 1.5, t, dt=1e-3)
    np.testing.assert_allclose(a.values, b.values * np.exp(-1j * c * t / eps), atol=1e-12)


def test_norm_over_many_steps():
    psi = ex1d_field(EPS)
    prop = SplitStepPropagator(psi.grid, PotentialModel("Cosine1D"), EPS, 1.3, 1e-5)
    v = psi.values
    for _ in range(10_000):
        v = prop.step(v)
    assert abs(np.linalg.norm(v) / np.linalg.norm(psi.values) - 1) <= 1e-12


def test_alpha_two_matches_standard_solver():
    eps, dt = EPS, 1e-3
    psi = ex1d_field(eps)
    x = psi.grid.axes[0]
    V = PotentialModel("Cosine1D")
    # textbook Strang step for i eps psi_t = -(eps^2/2) psi_xx + V psi
    k = 2 * np.pi * np.fft.fftfreq(len(x), d=x[1] - x[0])
    half = np.exp(-1j * (1 + np.cos(np.pi * x)) * (dt / (2 * eps)))
    kin = np.exp(-1j * (dt * eps * k ** 2 / 2))
    v = psi.values.copy()
    w = psi.values.copy()
    prop = SplitStepPropagator(psi.grid, V, eps, 2.0, dt)
    for _ in range(20):
        v = np.fft.ifftn(np.fft.fftn(v * half) * kin) * half
        w = prop.step(w)
    np.testing.assert_array_equal(w, v)


def test_strang_step_wrapper():
    psi = ex1d_field(EPS)
    V = PotentialModel("Cosine1D")
    a = strang_step(psi, V, EPS, 1.5, 1e-3)
    b = SplitStepPropagator(psi.grid, V, EPS, 1.5, 1e-3).step(psi.values)
    np.testing.assert_array_equal(a.values, b)


def test_zero_time():
    psi = ex1d_field(EPS)
    out = run_reference(psi, PotentialModel("Cosine1D"), EPS, 1.5, 0.0)
    np.testing.assert_array_equal(out.values, psi.values)
    assert out is not psi


def test_remainder_step():
    psi = ex1d_field(EPS)
    V = PotentialModel("Cosine1D")
    a = run_reference(psi, V, EPS, 1.5, 0.0105, dt=1e-3)
    b = run_reference(run_reference(psi, V, EPS, 1.5, 0.01, dt=1e-3), V, EPS, 1.5, 0.0005, dt=1e-3)
    np.testing.assert_allclose(a.values, b.values, atol=1e-13)


def test_unitarity_full_run():
    psi = ex1d_field(EPS)
    out = run_reference(psi, PotentialModel("Cosine1D"), EPS, 1.1, 0.25)
    assert abs(out.norm() / psi.norm() - 1) <= 1e-10


@pytest.mark.parametrize("alpha", [1.1, 1.9])
def test_self_convergence(alpha):
    psi = ex1d_field(EPS)
    V = PotentialModel("Cosine1D")
    a = run_reference(psi, V, EPS, alpha, 0.25)
    b = run_reference(psi, V, EPS, alpha, 0.25, dt=EPS ** 2 / 2)
    err = math.sqrt(np.sum(np.abs(a.values - b.values) ** 2) * psi.grid.cell_volume)
    assert err <= 1e-6


def test_coherent_state_follows_classical_path():
    eps = 2.0 ** -7
    grid = Grid.uniform(((0.0, 2.0),), eps)
    x = grid.axes[0]
    q0, p0, t = 0.9, 0.2, 0.6
    psi = WaveField(grid, np.exp(-(x - q0) ** 2 / (2 * eps) + 1j * p0 * (x - q0) / eps))
    out = run_reference(psi, PotentialModel("Harmonic1DShifted", (1.0,)), eps, 2.0, t)
    dens = np.abs(out.values) ** 2
    center = np.sum(x * dens) / np.sum(dens)
    classical = 1.0 + (q0 - 1.0) * math.cos(t) + p0 * math.sin(t)
    assert abs(center - classical) <= eps


def test_boundary_monitor():
    grid = Grid.uniform(((0.0, 2.0),), EPS)
    x = grid.axes[0]
    psi = WaveField(grid, np.exp(-200 * (x - 0.1) ** 2).astype(complex))
    assert boundary_mass_fraction(psi) > 0.1
    with pytest.warns(BoundaryContaminationWarning):
        run_reference(psi, PotentialModel("Zero", dim=1), EPS, 1.5, 0.01, dt=1e-3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run_reference(ex1d_field(EPS), PotentialModel("Cosine1D"), EPS, 1.5, 0.25)


def test_2d_reference_norm():
    eps = EPS
    grid = Grid.uniform(((0.0, 2.0), (0.0, 2.0)), eps)
    x1, x2 = grid.mesh()
    psi = WaveField(grid, (64 / np.pi) * np.exp(-64 * ((x1 - 1) ** 2 + (x2 - 1) ** 2)) * np.exp(1j * (x2 - 1) / eps))
    out = run_reference(psi, PotentialModel("Harmonic2DShifted", (1.0, 1.0)), eps, 1.5, 0.25)
    assert abs(out.norm() / psi.norm() - 1) <= 1e-10


class TestGrid:
    def test_power_of_two(self):
        with pytest.raises(ValueError):
            Grid(((0.0, 2.0),), (100,))

    def test_uniform_spacing(self):
        g = Grid.uniform(((0.0, 2.0),), 2.0 ** -6)
        assert g.n == (128,) and g.spacing[0] == 2.0 ** -6
        g.check_resolves(2.0 ** -6)
        with pytest.raises(ResolutionError):
            g.check_resolves(2.0 ** -7)

    def test_wavenumbers(self):
        g = Grid(((0.0, 2.0),), (8,))
        np.testing.assert_allclose(g.wavenumbers()[0], np.pi * np.array([0, 1, 2, 3, -4, -3, -2, -1]))

    def test_field_shape_check(self):
        with pytest.raises((ValueError, GridMismatchError)):
            WaveField(Grid(((0.0, 2.0),), (8,)), np.zeros(16, complex))
