import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgflux.equations import NavierStokes, ScalarAdvectionDiffusion
from dgflux.errors import ConfigError, NonPhysicalState, TimestepUnderflow
from dgflux.fv import FVSettings
from dgflux.timeint import (SCHEMES, TimestepFactors, calibrate_cfl, compute_dt, element_timesteps, get_scheme,
                            global_min_reduce, rk_step, stable_dt_bound)

from helpers import const_state, make_mesh, make_op

SCHEME_NAMES = sorted(SCHEMES)


def ode_error(scheme, n_steps, lam=-1.0, T=1.0):
    y = np.array([1.0])
    dt = T / n_steps
    R = None
    t = 0.0
    for _ in range(n_steps):
        y, R = rk_step(y, t, dt, scheme, lambda u, s: lam * u, R)
        t += dt
    return abs(y[0] - np.exp(lam * T))


def dense_butcher_step(y, dt, scheme, L):
    """Classical Runge-Kutta step with the tableau derived from the two-register form."""
    a, b, _ = scheme.butcher()
    k = []
    for i in range(scheme.stages):
        Y = y + dt * sum(a[i, j] * k[j] for j in range(i))
        k.append(L @ Y)
    return y + dt * sum(b[i] * k[i] for i in range(scheme.stages))


# -- schemes ----------------------------------------------------------------------------


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_scheme_consistency(name):
    s = get_scheme(name)
    assert s.A[0] == 0.0
    a, b, c = s.butcher()
    assert b.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(c, s.c, atol=1e-14)
    # order conditions through third order
    assert b @ c == pytest.approx(0.5, abs=1e-14)
    assert b @ c ** 2 == pytest.approx(1 / 3, abs=1e-14)
    assert b @ a @ c == pytest.approx(1 / 6, abs=1e-14)
    if s.order >= 4:
        assert b @ c ** 3 == pytest.approx(1 / 4, abs=1e-13)
        assert b @ (c * (a @ c)) == pytest.approx(1 / 8, abs=1e-13)
        assert b @ a @ c ** 2 == pytest.approx(1 / 12, abs=1e-13)
        assert b @ a @ a @ c == pytest.approx(1 / 24, abs=1e-13)


def test_scheme_lookup():
    assert get_scheme("RK4").name == "rk4"
    assert get_scheme("williamson").name == "rk3"
    assert get_scheme(SCHEMES["rk3"]) is SCHEMES["rk3"]
    with pytest.raises(ConfigError):
        get_scheme("rk7")


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_zero_rhs_leaves_state_bitwise(name):
    U = np.random.default_rng(0).normal(size=(4, 3, 5, 5))
    U0 = U.copy()
    rk_step(U, 0.0, 0.1, get_scheme(name), lambda V, t: np.zeros_like(V))
    np.testing.assert_array_equal(U, U0)


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_ode_convergence_order(name):
    s = get_scheme(name)
    n = np.array([20, 40, 80])
    e = np.array([ode_error(s, k) for k in n])
    order = np.log(e[:-1] / e[1:]) / np.log(2)
    assert abs(order[-1] - s.order) < 0.05


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_one_step_matches_dense_butcher_form(name):
    s = get_scheme(name)
    rng = np.random.default_rng(3)
    L = rng.normal(size=(6, 6))
    y = rng.normal(size=6)
    ref = dense_butcher_step(y, 0.05, s, L)
    out, _ = rk_step(y.copy(), 0.0, 0.05, s, lambda u, t: L @ u)
    assert np.abs(out - ref).max() < 1e-14


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_stage_times(name):
    s = get_scheme(name)
    seen = []
    rk_step(np.zeros(1), 2.0, 0.5, s, lambda u, t: (seen.append(t), np.zeros_like(u))[1])
    np.testing.assert_allclose(seen, 2.0 + 0.5 * np.array(s.c), rtol=0, atol=1e-15)


def test_time_dependent_rhs_order():
    # y' = cos t exercises the stage times
    s = get_scheme("rk4")
    errs = []
    for n in (10, 20, 40):
        y = np.zeros(1)
        R = None
        for k in range(n):
            y, R = rk_step(y, k / n, 1.0 / n, s, lambda u, t: np.array([np.cos(t)]), R)
        errs.append(abs(y[0] - np.sin(1.0)))
    assert np.log2(errs[-2] / errs[-1]) > 3.8


def test_step_validation_and_error_stage():
    s = get_scheme("rk4")
    with pytest.raises(ValueError):
        rk_step(np.zeros(2), 0.0, 0.0, s, lambda u, t: u)
    calls = []

    def rhs(u, t):
        calls.append(t)
        if len(calls) == 3:
            raise NonPhysicalState("negative pressure")
        return u

    with pytest.raises(NonPhysicalState) as info:
        rk_step(np.ones(2), 0.0, 0.1, s, rhs)
    assert info.value.stage == 2


def test_registers_reused():
    s = get_scheme("rk4")
    U = np.ones((2, 2, 3, 3))
    R = np.zeros_like(U)
    U2, R2 = rk_step(U, 0.0, 0.1, s, lambda V, t: -V, R)
    assert U2 is U and R2 is R


@given(st.lists(st.floats(1e-6, 10.0), min_size=1, max_size=20))
def test_global_min_reduce_is_exact_minimum(vals):
    assert global_min_reduce(vals) == min(vals)
    assert global_min_reduce(vals[::-1]) == min(vals)


def test_global_min_reduce_examples():
    assert global_min_reduce([0.25]) == 0.25
    assert global_min_reduce([0.3, 0.1, 0.2]) == 0.1
    with pytest.raises(ValueError):
        global_min_reduce([])


# -- time step -----------------------------------------------------------------------------


def test_factors_validated():
    with pytest.raises(ConfigError):
        TimestepFactors(cfl=0.0)
    with pytest.raises(ConfigError):
        TimestepFactors(gamma1={3: -1.0})
    f = TimestepFactors(gamma1={3: 0.8})
    assert f.g1(3) == 0.8 and f.g1(4) == 1.0


@pytest.mark.parametrize("N", [1, 3, 5])
def test_advection_dt_formula(N):
    h = 0.25
    op = make_op(make_mesh(4, 4), N=N, eq=ScalarAdvectionDiffusion(1.0, 0.0))
    U = np.ones(op.state_shape())
    f = TimestepFactors(cfl=0.7, gamma1={N: 0.9})
    assert compute_dt(op, U, f) == pytest.approx(0.7 * 0.9 * h / (2 * N + 1), rel=1e-14)


def test_directional_sizes_on_rectangles():
    op = make_op(make_mesh(4, 2), N=2, eq=ScalarAdvectionDiffusion(1.0, 1.0))
    np.testing.assert_allclose(op.geo.dx_dir[:, 0], 0.25, rtol=1e-14)
    np.testing.assert_allclose(op.geo.dx_dir[:, 1], 0.5, rtol=1e-14)
    # the short direction limits
    dt = compute_dt(op, np.ones(op.state_shape()), TimestepFactors(cfl=1.0))
    assert dt == pytest.approx(0.25 / 5, rel=1e-14)


def test_viscous_bound_scales_with_h_squared():
    eq = ScalarAdvectionDiffusion(0.0, 0.0, kappa=0.1)
    f = TimestepFactors(cfld=0.5)
    vals = []
    for n in (4, 8):
        op = make_op(make_mesh(n, n), N=3, eq=eq)
        _, dv = element_timesteps(op, np.ones(op.state_shape()), f)
        vals.append(dv.max())
    assert vals[1] == pytest.approx(vals[0] / 4, rel=1e-13)


def test_velocity_doubling_halves_dt():
    mesh = make_mesh(3, 3, curving="sine_xy", amp=0.05, ngeo=2)
    slow = make_op(mesh, N=3, eq=ScalarAdvectionDiffusion(0.3, -0.4))
    fast = make_op(mesh, N=3, eq=ScalarAdvectionDiffusion(0.6, -0.8))
    U = np.ones(slow.state_shape())
    assert compute_dt(fast, U, TimestepFactors()) == compute_dt(slow, U, TimestepFactors()) / 2


def test_fv_bound_exceeds_dg_bound():
    mesh = make_mesh(4, 4)
    for N in (1, 2, 3, 5, 7):
        op = make_op(mesh, N=N, fv=FVSettings())
        U = const_state(op)
        is_fv = np.zeros(16, bool)
        is_fv[::3] = True
        dc, _ = element_timesteps(op, U, TimestepFactors(), is_fv)
        assert dc[is_fv].min() > dc[~is_fv].max()
        assert dc[is_fv][0] / dc[~is_fv][0] == pytest.approx((2 * N + 1) / (N + 1), rel=1e-14)


def test_navier_stokes_takes_both_bounds():
    op = make_op(make_mesh(4, 4), N=3, eq=NavierStokes(mu=0.5))
    U = const_state(op)
    dc, dv = element_timesteps(op, U, TimestepFactors())
    assert np.all(dv < dc)
    assert compute_dt(op, U, TimestepFactors()) == dv.min()


def test_dt_partition_invariant():
    kw = dict(curving="sine_xy", amp=0.05, ngeo=2)
    a = make_op(make_mesh(6, 6, **kw), N=3)
    U = const_state(a)
    ref = compute_dt(a, U, TimestepFactors())
    for k in (2, 5, 7):
        b = make_op(make_mesh(6, 6, k=k, **kw), N=3)
        assert compute_dt(b, U, TimestepFactors()) == ref


def test_dt_errors():
    op = make_op(make_mesh(2, 2), N=2)
    U = const_state(op)
    U[3, 1, 0, 0] = -1.0
    with pytest.raises(NonPhysicalState):
        compute_dt(op, U, TimestepFactors())
    still = make_op(make_mesh(2, 2), N=2, eq=ScalarAdvectionDiffusion(0.0, 0.0))
    with pytest.raises(ConfigError, match="time step"):
        compute_dt(still, np.ones(still.state_shape()), TimestepFactors())
    tiny = make_op(make_mesh(2, 2, bounds=((0.0, 1e-12), (0.0, 1e-12))), N=2,
                   eq=ScalarAdvectionDiffusion(1e3, 0.0))
    with pytest.raises(TimestepUnderflow) as info:
        compute_dt(tiny, np.ones(tiny.state_shape()), TimestepFactors())
    assert info.value.element in range(4)


# -- calibration ---------------------------------------------------------------------------


def test_stable_bound_for_known_spectrum():
    # RK4 (classical or low-storage) is stable on the negative real axis down to about -2.78
    s = get_scheme("rk4")
    bound = stable_dt_bound(np.array([-1.0]), s, hi=0.1)
    R = lambda z: abs(s.stability_function(z)[0])  # noqa: E731
    assert R(-bound) <= 1.0 + 1e-10 and R(-bound * 1.001) > 1.0
    assert 2.5 < bound < 5.0


@settings(deadline=None, max_examples=5)
@given(st.sampled_from(["rk3", "rk4"]))
def test_stability_function_matches_a_step(name):
    s = get_scheme(name)
    z = -0.7 + 0.3j
    y, _ = rk_step(np.array([1.0 + 0j]), 0.0, 1.0, s, lambda u, t: z * u)
    assert abs(y[0] - s.stability_function(z)[0]) < 1e-14


def test_calibration_reports_positive_factor():
    r = calibrate_cfl(2, "LGL", "rk4")
    assert r["gamma1"] > 0.3
    assert r["dt_stable"] == pytest.approx(r["gamma1"] * r["dt_formula"])
