import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hjadjoint.grid import GridError, GridFunction, PeriodicGrid, ShiftParam, delta
from hjadjoint.hamiltonians import Hamiltonian, NumericalFlux, UnsupportedOperation, gamma_bound
from hjadjoint.initial_data import bump, constant, cosine, from_samples, named, sine
from hjadjoint.solver import (
    CFLViolation,
    InsufficientTrajectory,
    SolverConfig,
    advance,
    evolve_gradient,
    evolve_second,
    gradient_box,
    max_stable_dt,
    monitor_bounds,
    rhs,
    solve,
    step_count,
)

Q = Hamiltonian.quadratic()
UPWIND = NumericalFlux.upwind_quadratic()


def cl_flux(u0=None, H=Q):
    return NumericalFlux.crandall_lions(H, gamma_bound(H, gradient_box(u0 or cosine())))


def test_rhs_hand_example():
    g = PeriodicGrid(2)
    out = rhs(GridFunction(g, [0.0, 1.0]), UPWIND, 1)
    np.testing.assert_array_equal(out.values, [0.0, -4.0])


def test_rhs_of_constant():
    g = PeriodicGrid(8)
    c = GridFunction(g, np.full(8, 2.0))
    assert np.all(rhs(c, UPWIND, 1).values == 0.0)
    H = Hamiltonian.tabulated(lambda p: 0.5 * p**2 + 0.3, lambda p: p)
    F = NumericalFlux.crandall_lions(H, 1.0)
    np.testing.assert_allclose(rhs(c, F, 1).values, -0.3, atol=1e-15)


def test_advance_constant_any_dt():
    g = PeriodicGrid(8)
    c = GridFunction(g, np.full(8, 2.0))
    assert np.array_equal(advance(c, UPWIND, 1, 10.0).values, c.values)


def test_advance_rejects_large_step():
    g = PeriodicGrid(16)
    u = g.sample(lambda x: np.cos(2 * np.pi * x))
    dt = max_stable_dt(UPWIND, ShiftParam(1, g), 2 * np.pi + 1)
    with pytest.raises(CFLViolation):
        advance(u, UPWIND, 1, 10 * dt)
    with pytest.raises(ValueError):
        advance(u, UPWIND, 1, dt, integrator="heun")
    with pytest.raises(GridError):
        advance(u, UPWIND, -1, dt)


@given(
    arrays(float, 32, elements=st.floats(-1, 1)),
    arrays(float, 32, elements=st.floats(0, 1)),
    st.sampled_from(["upwind", "cl"]),
)
def test_euler_step_preserves_order(u, gap, kind):
    g = PeriodicGrid(32)
    s = ShiftParam(1, g)
    F = UPWIND if kind == "upwind" else NumericalFlux.crandall_lions(Q, gamma_bound(Q, 3 * 32 + 1))
    R = 2.0 * 32 * 2.0 + 1.0
    dt = 0.9 * max_stable_dt(F, s, R)
    a = advance(GridFunction(g, u), F, s, dt, R=R).values
    b = advance(GridFunction(g, u + gap), F, s, dt, R=R).values
    assert np.all(a <= b)


@pytest.mark.parametrize("flux", ["upwind", "cl", "split", "smoothed"])
def test_constant_preserved(flux):
    F = {
        "upwind": UPWIND,
        "cl": NumericalFlux.crandall_lions(Q, 1.0),
        "split": NumericalFlux.split(Q),
        "smoothed": NumericalFlux.smoothed_upwind(1e-2),
    }[flux]
    traj = solve(constant(3.0), F, SolverConfig(n=16, T=1.0))
    assert np.all(traj.final.values == 3.0)


def test_constant_drifts_by_f00():
    H = Hamiltonian.tabulated(lambda p: 0.5 * p**2 + 0.25, lambda p: p)
    traj = solve(constant(1.0), NumericalFlux.crandall_lions(H, 1.0), SolverConfig(n=16, T=2.0))
    np.testing.assert_allclose(traj.final.values, 1.0 - 0.25 * 2.0, atol=1e-13)


def test_translation_equivariance():
    n = 32
    vals = np.cos(2 * np.pi * np.arange(n) / n) + 0.3 * np.sin(6 * np.pi * np.arange(n) / n)
    t1 = solve(from_samples(vals), UPWIND, SolverConfig(n=n, T=0.3))
    t2 = solve(from_samples(np.roll(vals, 1)), UPWIND, SolverConfig(n=n, T=0.3))
    assert t1.nsteps == t2.nsteps
    assert np.array_equal(np.roll(t1.states, 1, axis=1), t2.states)


def test_step_selection_respects_cfl():
    cfg = SolverConfig(n=64, T=1.0, cfl=0.5)
    traj = solve(cosine(), UPWIND, cfg)
    assert traj.dt <= 0.5 * (1 / 64) / traj.speed * (1 + 1e-12)
    assert traj.nsteps == step_count(1.0, 0.5 * (1 / 64) / traj.speed)
    assert traj.times[-1] == pytest.approx(1.0)
    assert traj.every_step


def test_solve_with_too_few_steps_is_refused():
    with pytest.raises(CFLViolation):
        solve(cosine(), UPWIND, SolverConfig(n=64, T=1.0), nsteps=10)


def test_record_steps_subset():
    traj = solve(cosine(), UPWIND, SolverConfig(n=16, T=0.5), record_steps=[3, 7])
    assert list(traj.steps) == [0, 3, 7, traj.nsteps]
    full = solve(cosine(), UPWIND, SolverConfig(n=16, T=0.5))
    assert np.array_equal(full.states[7], traj.states[2])
    with pytest.raises(InsufficientTrajectory):
        evolve_gradient(traj)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(n=16, cfl=0.0)
    with pytest.raises(ValueError):
        SolverConfig(n=16, integrator="heun")


def test_gradient_of_constant_is_zero():
    traj = evolve_second(evolve_gradient(solve(constant(2.0), cl_flux(), SolverConfig(n=16, T=0.5))))
    assert np.all(traj.gradient_states == 0.0)
    assert np.all(traj.second_states == 0.0)


def test_gradient_is_derivative_of_discrete_solution():
    # the Euler update commutes with x-translation, so v is d/dx of the fully discrete state
    n, eps = 64, 1e-6
    base = sine()
    shifted = named("sin")
    traj = evolve_gradient(solve(base, UPWIND, SolverConfig(n=n, T=0.02)))
    g = PeriodicGrid(n)
    import dataclasses

    moved = dataclasses.replace(shifted, value=lambda x: base.value(x + eps))
    t2 = solve(moved, UPWIND, SolverConfig(n=n, T=0.02), nsteps=traj.nsteps)
    fd = (t2.final.values - traj.final.values) / eps
    assert np.max(np.abs(fd - traj.gradient_states[-1])) < 1e-4 * (1 + np.max(np.abs(fd)))
    assert g.n == n


def test_gradient_matches_centred_difference_on_smooth_run():
    n = 256
    traj = evolve_gradient(solve(sine(0.1), cl_flux(sine(0.1)), SolverConfig(n=n, T=0.2)))
    u = traj.final.values
    cd = (np.roll(u, -1) - np.roll(u, 1)) * (n / 2)
    assert np.max(np.abs(cd - traj.gradient_states[-1])) < 1e-2


def test_second_matches_difference_of_gradient():
    n = 256
    traj = evolve_second(evolve_gradient(solve(sine(0.1), cl_flux(sine(0.1)), SolverConfig(n=n, T=0.2))))
    v = traj.gradient_states[-1]
    cd = (np.roll(v, -1) - np.roll(v, 1)) * (n / 2)
    assert np.max(np.abs(cd - traj.second_states[-1])) < 0.05


def test_second_needs_hessian():
    traj = evolve_gradient(solve(cosine(), UPWIND, SolverConfig(n=16, T=0.1)))
    with pytest.raises(UnsupportedOperation):
        evolve_second(traj)


@pytest.mark.parametrize("u0", [cosine(), bump(), sine(0.5, 2)], ids=["cos", "bump", "sin2"])
def test_a_priori_bounds_hold_under_euler(u0):
    traj = evolve_second(evolve_gradient(solve(u0, cl_flux(u0), SolverConfig(n=64, T=0.5))))
    rep = monitor_bounds(traj)
    assert rep.sup_bound_max <= 1e-8
    assert rep.lipschitz_max <= 1e-8
    assert rep.one_sided_second_max <= 1e-6
    assert np.max(np.abs(traj.gradient_states)) <= u0.lip + 1e-8


def test_monitors_on_constant():
    rep = monitor_bounds(solve(constant(1.0), UPWIND, SolverConfig(n=16, T=0.3)))
    assert all(v <= 1e-12 for v in rep.maxima().values())


def test_cfl_canary_trips_monitors():
    cfg = SolverConfig(n=32, T=0.2, cfl=4.0)
    traj = solve(cosine(), UPWIND, cfg, check_cfl=False)
    assert monitor_bounds(traj).lipschitz_max > 0.1


def test_rk4_integrator_runs_and_is_close_to_euler():
    e = solve(cosine(), UPWIND, SolverConfig(n=64, T=0.2))
    r = evolve_gradient(solve(cosine(), UPWIND, SolverConfig(n=64, T=0.2, integrator="rk4")))
    assert np.max(np.abs(e.final.values - r.final.values)) < 1e-2
    assert r.gradient_states is not None


def test_step_count_rounding():
    assert step_count(1.0, 0.25) == 4
    assert step_count(1.0, 0.3) == 4
    assert step_count(1.0, float("inf")) == 1
    with pytest.raises(CFLViolation):
        step_count(1.0, 1e-12)


def test_delta_based_lipschitz_monitor_uses_differences():
    traj = solve(cosine(), UPWIND, SolverConfig(n=32, T=0.1), record_steps=[])
    rep = monitor_bounds(traj)
    assert "lip_gradient" not in rep.series
    d = max(delta(traj.final, 1).sup_norm(), delta(traj.final, -1).sup_norm())
    assert rep.series["lip_delta"][-1] == pytest.approx(d - cosine().lip)
