import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjadjoint import initial_data as ic
from hjadjoint.adjoint import (
    DiscreteMeasure,
    assemble_stencil,
    compensated_energy,
    energy_flux_integral,
    h_derivative_estimate,
    linearized_apply,
    propagate_adjoint,
    representation_residual,
    representation_sides,
)
from hjadjoint.grid import GridError, GridFunction, PeriodicGrid, ShiftParam
from hjadjoint.hamiltonians import Hamiltonian, NumericalFlux, UnsupportedOperation, gamma_bound
from hjadjoint.solver import (
    InsufficientTrajectory,
    SolverConfig,
    coefficients,
    evolve_gradient,
    gradient_box,
    solve,
)

H = Hamiltonian.quadratic()
UPWIND = NumericalFlux.upwind_quadratic()
u0 = ic.cosine()
CL = NumericalFlux.crandall_lions(H, gamma_bound(H, gradient_box(u0)))
FLUXES = [UPWIND, CL, NumericalFlux.split(H), NumericalFlux.smoothed_upwind(1e-3)]


def _traj(F=UPWIND, n=32, m=2, T=0.25, data=u0):
    return solve(data, F, SolverConfig(n=n, m=m, T=T))


def _forward_linear(traj, theta0):
    """theta^{k+1} = (I + dt A^k) theta^k."""
    out = [np.asarray(theta0, dtype=float)]
    for k in range(traj.nsteps):
        A = assemble_stencil(traj.state(k), traj.flux, traj.shift)
        out.append(out[-1] + traj.dt * A @ out[-1])
    return np.array(out)


class TestMeasure:
    def test_dirac_and_uniform(self):
        g = PeriodicGrid(10)
        d = DiscreteMeasure.dirac(g, 0.31)
        assert d.weights[3] == 1.0 and d.mass == 1.0
        u = DiscreteMeasure.uniform(g)
        assert u.mass == pytest.approx(1.0, abs=1e-15) and u.is_probability()

    def test_dirac_wraps(self):
        g = PeriodicGrid(8)
        assert DiscreteMeasure.dirac(g, 0.99).weights[0] == 1.0
        assert DiscreteMeasure.dirac_at(g, -1).weights[7] == 1.0

    def test_weights_are_readonly(self):
        d = DiscreteMeasure.uniform(PeriodicGrid(4))
        with pytest.raises(ValueError):
            d.weights[0] = 3.0

    def test_rejects_bad_weights(self):
        g = PeriodicGrid(4)
        with pytest.raises(ValueError):
            DiscreteMeasure(g, np.ones(3))
        with pytest.raises(ValueError):
            DiscreteMeasure(g, np.array([1.0, np.nan, 0, 0]))

    def test_validate_flags_signed(self):
        m = DiscreteMeasure(PeriodicGrid(4), np.array([1.5, -0.5, 0, 0]))
        assert not m.is_probability()
        with pytest.raises(ValueError):
            m.validate()


class TestStencil:
    @pytest.mark.parametrize("F", FLUXES, ids=lambda F: F.label)
    def test_matches_basis_vectors(self, F, rng):
        g = PeriodicGrid(16)
        state = GridFunction(g, np.cos(2 * np.pi * g.x) + 0.1 * rng.standard_normal(16))
        s = ShiftParam(3, g)
        A = assemble_stencil(state, F, s)
        for j in range(16):
            e = GridFunction(g, np.eye(16)[j])
            np.testing.assert_allclose(A[:, j], linearized_apply(state, F, s, e).values, atol=1e-13)

    @pytest.mark.parametrize("F", FLUXES, ids=lambda F: F.label)
    def test_rows_sum_to_zero_and_step_is_monotone(self, F):
        traj = _traj(F)
        for k in (0, traj.nsteps // 2, traj.nsteps - 1):
            A = assemble_stencil(traj.state(k), F, traj.shift)
            np.testing.assert_allclose(A.sum(axis=1), 0.0, atol=1e-12)
            assert np.min(np.eye(32) + traj.dt * A) >= -1e-15

    def test_coefficients_nonnegative(self):
        traj = _traj(CL)
        a, b = coefficients(traj.states[3], CL, traj.shift)
        assert np.all(a >= 0) and np.all(b >= 0)


class TestPropagation:
    def test_duality(self, rng):
        traj = _traj(n=24, m=3)
        theta = _forward_linear(traj, rng.standard_normal(24))
        adj = propagate_adjoint(traj, DiscreteMeasure.dirac(traj.grid, 0.0))
        assert abs(adj.weights[-1] @ theta[-1] - adj.weights[0] @ theta[0]) <= 1e-13

    def test_constant_data_keeps_dirac_fixed(self):
        traj = _traj(data=ic.constant(0.7))
        adj = propagate_adjoint(traj, DiscreteMeasure.dirac_at(traj.grid, 5))
        for k in range(traj.nsteps + 1):
            np.testing.assert_array_equal(adj.weights[k], np.eye(32)[5])

    @pytest.mark.parametrize("F", FLUXES, ids=lambda F: F.label)
    @pytest.mark.parametrize("terminal", ["dirac", "uniform"])
    def test_probability_invariants(self, F, terminal):
        traj = _traj(F)
        mu = DiscreteMeasure.dirac(traj.grid, 0.0) if terminal == "dirac" else DiscreteMeasure.uniform(traj.grid)
        adj = propagate_adjoint(traj, mu)
        assert adj.all_probability()
        assert np.max(adj.mass_errors) <= 1e-12
        assert np.min(adj.min_weights) >= -1e-14
        assert adj.measure(0).is_probability()

    def test_times_span_the_forward_run(self):
        traj = _traj()
        adj = propagate_adjoint(traj, DiscreteMeasure.uniform(traj.grid))
        assert adj.times[0] == 0.0 and adj.times[-1] == pytest.approx(0.25)

    def test_requires_every_step(self):
        traj = solve(u0, UPWIND, SolverConfig(n=32, m=2, T=0.25, stride=3))
        with pytest.raises(InsufficientTrajectory):
            propagate_adjoint(traj, DiscreteMeasure.uniform(traj.grid))

    def test_rejects_rk4(self):
        traj = solve(u0, UPWIND, SolverConfig(n=32, m=2, T=0.25, integrator="rk4"))
        with pytest.raises(UnsupportedOperation):
            propagate_adjoint(traj, DiscreteMeasure.uniform(traj.grid))

    def test_rejects_foreign_grid(self):
        traj = _traj()
        with pytest.raises(GridError):
            propagate_adjoint(traj, DiscreteMeasure.uniform(PeriodicGrid(16)))


class TestRepresentation:
    def test_constant_theta(self):
        adj = propagate_adjoint(_traj(), DiscreteMeasure.dirac(PeriodicGrid(32), 0.0))
        r = representation_sides(adj, lambda x, t: np.ones_like(x))
        assert abs(r.rhs) <= 1e-15 and r.residual <= 1e-15

    def test_theta_equals_time(self):
        traj = _traj()
        adj = propagate_adjoint(traj, DiscreteMeasure.dirac(traj.grid, 0.0))
        r = representation_sides(adj, lambda x, t: t)
        assert r.rhs == pytest.approx(traj.times[-1], abs=1e-13)
        assert r.residual <= 1e-13

    @settings(max_examples=20)
    @given(st.integers(0, 2**32 - 1))
    def test_random_theta(self, seed):
        rng = np.random.default_rng(seed)
        traj = solve(u0, CL, SolverConfig(n=64, m=4, T=0.1))
        adj = propagate_adjoint(traj, DiscreteMeasure.dirac_at(traj.grid, int(rng.integers(64))))
        theta = rng.standard_normal((traj.nsteps + 1, 64))
        assert representation_residual(adj, theta) <= 1e-10

    def test_shape_checked(self):
        traj = _traj()
        adj = propagate_adjoint(traj, DiscreteMeasure.uniform(traj.grid))
        with pytest.raises(GridError):
            representation_residual(adj, np.zeros((2, 32)))


class TestEnergies:
    def test_flux_energy_nonnegative(self):
        traj = evolve_gradient(_traj())
        adj = propagate_adjoint(traj, DiscreteMeasure.dirac(traj.grid, 0.0))
        e = energy_flux_integral(traj, adj)
        assert e > 0
        assert energy_flux_integral(traj, adj, h_weighted=False) == pytest.approx(e / traj.h)

    def test_flux_energy_zero_for_constant_data(self):
        traj = evolve_gradient(_traj(data=ic.constant(1.0)))
        adj = propagate_adjoint(traj, DiscreteMeasure.uniform(traj.grid))
        assert energy_flux_integral(traj, adj) == 0.0

    def test_flux_energy_needs_gradient(self):
        traj = _traj()
        adj = propagate_adjoint(traj, DiscreteMeasure.uniform(traj.grid))
        with pytest.raises(InsufficientTrajectory):
            energy_flux_integral(traj, adj)

    def test_compensated_energy_only_for_cl(self):
        with pytest.raises(UnsupportedOperation):
            compensated_energy(evolve_gradient(_traj()))
        traj = evolve_gradient(_traj(CL))
        assert np.isfinite(compensated_energy(traj))
        assert compensated_energy(evolve_gradient(_traj(CL, data=ic.constant(2.0)))) == 0.0

    def test_cl_flux_energy_does_not_stay_bounded(self):
        # the h-weighted energy decays like h away from the kink, so no uniform ratio bound holds here
        vals = []
        for n in (32, 64, 128):
            traj = evolve_gradient(solve(u0, CL, SolverConfig(n=n, m=1, T=0.5)))
            adj = propagate_adjoint(traj, DiscreteMeasure.dirac(traj.grid, 0.0))
            vals.append(energy_flux_integral(traj, adj))
        assert vals[0] / vals[-1] > 2.5


class TestHDerivative:
    def test_requires_m_at_least_8(self):
        with pytest.raises(GridError):
            h_derivative_estimate(u0, UPWIND, 256, 4, 0.1)
        with pytest.raises(GridError):
            h_derivative_estimate(u0, UPWIND, 16, 15, 0.1)

    def test_constant_data_has_zero_derivative(self):
        r = h_derivative_estimate(ic.constant(0.3), UPWIND, 256, 8, 0.2)
        assert np.all(r.max_x == 0.0) and np.all(r.min_x == 0.0)
        assert r.c_up == 0.0 and r.lower_constant() == 0.0

    def test_upper_bound_holds(self):
        r = h_derivative_estimate(u0, UPWIND, 512, 8, 0.25)
        assert r.upper_excess(1e-9) <= 0.0
        assert r.times[0] == 0.0 and r.times[-1] == pytest.approx(0.25)
        assert r.max_x[0] == 0.0


@pytest.mark.xfail(strict=True, reason="with the CL flux the h-weighted energy falls by about 6x from h=1/32 to h=1/256")
def test_cl_flux_energy_ratio_within_four():
    vals = []
    for n in (32, 64, 128, 256):
        traj = evolve_gradient(solve(u0, CL, SolverConfig(n=n, m=1, T=1.0)))
        adj = propagate_adjoint(traj, DiscreteMeasure.dirac(traj.grid, 0.0))
        vals.append(energy_flux_integral(traj, adj))
    assert max(vals) / min(vals) <= 4.0
