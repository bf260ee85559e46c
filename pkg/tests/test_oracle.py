import numpy as np
import pytest

from hjadjoint.grid import GridError, GridFunction, PeriodicGrid
from hjadjoint.hamiltonians import Hamiltonian, NumericalFlux
from hjadjoint.initial_data import constant, cosine, sine
from hjadjoint.oracle import ExactSolution, exact_on_grid, fine_reference, hopf_lax, sup_distance
from hjadjoint.solver import SolverConfig, solve

Q = Hamiltonian.quadratic()
COS = ExactSolution(cosine(), Q)

# min_y cos(2 pi y) + y^2 over 10^6 samples of [-5, 5], polished on a 1e-10 grid
BRUTE_X0_T05 = -0.7620765452599305


def test_matches_brute_force_minimum():
    assert abs(hopf_lax(COS, 0.0, 0.5) - BRUTE_X0_T05) <= 1e-8


def test_initial_time_returns_data():
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(hopf_lax(COS, x, 0.0), np.cos(2 * np.pi * x), atol=1e-12)


def test_short_time_limit():
    t = 1e-6
    x = np.linspace(0, 1, 17, endpoint=False)
    u0 = cosine()
    expected = u0(x) - t * 0.5 * u0.dx(x) ** 2
    assert np.max(np.abs(hopf_lax(COS, x, t) - expected)) <= 1e-8
    assert abs(hopf_lax(COS, 0.0, t) - 1.0) <= 1e-8


def test_constant_data():
    H = Hamiltonian.tabulated(lambda p: 0.5 * p**2 + 0.4, lambda p: p)
    sol = ExactSolution(constant(2.0), H)
    assert hopf_lax(sol, 0.3, 1.5) == pytest.approx(2.0 - 1.5 * 0.4, abs=1e-9)


def test_generic_hamiltonian_agrees_with_quadratic_path():
    H = Hamiltonian.tabulated(lambda p: 0.5 * p**2, lambda p: p, lambda p: np.ones_like(p), label="q")
    x = np.linspace(0, 1, 9, endpoint=False)
    a = hopf_lax(ExactSolution(cosine(), H), x, 0.2)
    b = hopf_lax(COS, x, 0.2)
    assert np.max(np.abs(a - b)) <= 1e-8


def test_periodicity():
    x = np.linspace(0, 1, 13)
    assert np.max(np.abs(hopf_lax(COS, x + 1.0, 0.7) - hopf_lax(COS, x, 0.7))) <= 1e-10


def test_monotone_in_data():
    lo = ExactSolution(cosine(), Q)
    hi_data = cosine()
    import dataclasses

    hi = ExactSolution(dataclasses.replace(hi_data, value=lambda x: np.cos(2 * np.pi * x) + 0.1 + 0.05 * np.sin(2 * np.pi * x) ** 2), Q)
    x = np.linspace(0, 1, 21)
    assert np.all(hopf_lax(lo, x, 0.4) <= hopf_lax(hi, x, 0.4) + 1e-12)


def test_semigroup():
    t1, t2 = 0.2, 0.3
    x = np.linspace(0, 1, 7, endpoint=False)
    direct = hopf_lax(COS, x, t1 + t2)
    N = 4096
    ys = np.arange(N) / N
    mid = hopf_lax(COS, ys, t1)
    # minimize mid(y) + (x - y)^2 / (2 t2) over a dense periodic sample
    yy = np.concatenate([ys - 1, ys, ys + 1])
    mm = np.concatenate([mid, mid, mid])
    stepped = np.array([np.min(mm + (xi - yy) ** 2 / (2 * t2)) for xi in x])
    assert np.max(np.abs(stepped - direct)) <= 1e-6


def test_negative_time():
    with pytest.raises(ValueError):
        hopf_lax(COS, 0.0, -1.0)


def test_exact_on_grid_shape():
    g = PeriodicGrid(16)
    assert exact_on_grid(COS, g, 0.1).values.shape == (16,)


def test_fine_reference_subsampling_is_exact():
    F = NumericalFlux.upwind_quadratic()
    ref = fine_reference(cosine(), F, 0.3, 128, 16)
    traj = solve(cosine(), F, SolverConfig(n=128, T=0.3), record_steps=[])
    assert np.array_equal(ref.values, traj.final.values[::8])


def test_fine_reference_constant():
    ref = fine_reference(constant(1.5), NumericalFlux.upwind_quadratic(), 1.0, 128, 16)
    assert np.all(ref.values == 1.5)


def test_fine_reference_grid_checks():
    F = NumericalFlux.upwind_quadratic()
    with pytest.raises(GridError):
        fine_reference(cosine(), F, 0.1, 100, 16)
    with pytest.raises(GridError):
        fine_reference(cosine(), F, 0.1, 64, 16)


def test_fine_reference_agrees_with_hopf_lax():
    F = NumericalFlux.upwind_quadratic()
    ref = fine_reference(cosine(), F, 0.5, 1024, 32)
    ex = exact_on_grid(COS, PeriodicGrid(32), 0.5)
    assert sup_distance(ref, ex) <= 1.0 * np.sqrt(1 / 1024)


def test_sup_distance():
    g = PeriodicGrid(8)
    a = GridFunction(g, np.arange(8.0))
    b = a + 1.0
    assert sup_distance(a, a) == 0.0
    assert sup_distance(a, b) == 1.0
    c = GridFunction(g, np.sin(np.arange(8.0)))
    assert sup_distance(a, c) == sup_distance(c, a)
    with pytest.raises(GridError):
        sup_distance(a, GridFunction(PeriodicGrid(4), np.zeros(4)))


def test_sine_data_runs_through_window_logic():
    sol = ExactSolution(sine(), Q)
    assert sol.half_width(1.0) == pytest.approx(sol.speed + 1.0)
