import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from misblowup import constitutive as C
from misblowup.constitutive import abar_bound, ideal_gas_set, validate_assumptions
from misblowup.flowline import (
    FlowlineForcing,
    constant_forcing,
    d_pressure_total_dtau,
    flowline_rhs,
    integrate_flowline,
    pi_bound,
    random_forcing,
    sine_forcing,
    solve_F_characteristic,
    transport_residual,
    wec_propagation_check,
)


def viscous_set(lam=None):
    return ideal_gas_set(gamma=4 / 3, zeta=C.n_exp(), tau0=C.constant(1.0), lam=lam)


def rk4_reference(rhs, y0, tau_max, h):
    y = np.array(y0, dtype=float)
    steps = int(round(tau_max / h))
    for i in range(steps):
        t = i * h
        k1 = np.array(rhs(t, y))
        k2 = np.array(rhs(t + h / 2, y + h / 2 * k1))
        k3 = np.array(rhs(t + h / 2, y + h / 2 * k2))
        k4 = np.array(rhs(t + h, y + h * k3))
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_pure_relaxation_decays_exponentially():
    cset = ideal_gas_set(gamma=2.0)
    path = integrate_flowline((2.0, 1.0, 0.3), cset, constant_forcing(0.0), 4.0)
    assert np.allclose(path.rho, 2.0, atol=1e-14)
    assert np.allclose(path.n, 1.0, atol=1e-14)
    assert np.allclose(path.Pi, 0.3 * np.exp(-path.tau), rtol=1e-8, atol=1e-14)


def test_no_expansion_freezes_densities():
    cset = viscous_set(lam=C.saturating(0.1, 1.0))
    path = integrate_flowline((1.0, 0.5, -0.1), cset, constant_forcing(0.0), 3.0)
    assert np.ptp(path.rho) == 0.0
    assert np.ptp(path.n) == 0.0


def test_adaptive_path_matches_fixed_step_reference():
    cset = ideal_gas_set(gamma=1.5, zeta=C.n_exp(), tau0=C.constant(0.5))
    forcing = sine_forcing(0.6, 1.3, 0.1)
    tol = 1e-9
    path = integrate_flowline((1.2, 0.4, 0.05), cset, forcing, 5.0, tol=tol)
    ref = rk4_reference(flowline_rhs(cset, forcing), (1.2, 0.4, 0.05), 5.0, 5e-4)
    got = np.array([path.rho[-1], path.n[-1], path.Pi[-1]])
    assert np.all(np.abs(got - ref) <= 10 * tol * np.maximum(1.0, np.abs(ref)))


def test_inviscid_start_keeps_inertia_nonnegative():
    cset = ideal_gas_set(gamma=4 / 3)
    path = integrate_flowline((1.0, 0.5, 0.0), cset, sine_forcing(0.5, 1.0), 5.0)
    assert np.allclose(path.Pi, 0.0, atol=0)
    assert wec_propagation_check(path).ok


def test_large_lambda_is_an_assumption_breach():
    cset = viscous_set(lam=C.constant(5.0))
    assert validate_assumptions(cset).by_assumption("A5")


def test_floor_stops_integration():
    cset = ideal_gas_set(gamma=4 / 3)
    path = integrate_flowline((1.0, 0.5, 0.0), cset, constant_forcing(5.0), 100.0, n_floor=1e-3)
    assert path.status == "n_floor"
    assert path.n[-1] == pytest.approx(1e-3, rel=1e-6)


def test_pi_bound_values():
    assert pi_bound(0.0, 1.0) == 3.0
    assert pi_bound(-0.4, 0.0) == 0.4


def test_inviscid_characteristic_keeps_F_constant():
    cset = ideal_gas_set(gamma=4 / 3)
    res = solve_F_characteristic(cset, (1.0, 0.5, 0.2), n_range=(1e-2, 1e2), samples=41)
    assert np.ptp(res.F) == 0.0
    assert res.F[0] == pytest.approx(-1e-3 * math.tanh(0.2))


def test_characteristic_bounds_and_sign():
    cset = viscous_set()
    abar = abar_bound(cset).value
    assert abar == pytest.approx(1.0, abs=1e-6)
    res = solve_F_characteristic(cset, (1.0, 1.0, 0.0), n_range=(1e-4, 1e3), samples=101)
    assert res.complete
    assert np.max(np.abs(res.F)) <= res.eps + abar
    assert np.all(res.dF_dPi < 0)


def test_transport_residual_along_characteristic():
    cset = viscous_set()
    res = solve_F_characteristic(cset, (1.0, 0.5, 0.1), n_range=(1e-3, 1e2), samples=61)
    assert transport_residual(cset, res).max() <= 1e-6


def test_total_pressure_identity_along_path():
    cset = viscous_set(lam=C.saturating(0.1, 1.0))
    forcing = sine_forcing(0.5, 2.0, 0.1)
    path = integrate_flowline((1.0, 0.5, 0.05), cset, forcing, 3.0, tol=1e-11)
    tau = np.linspace(0.1, 2.9, 29)
    h = 1e-4
    def total(t):
        rho, n, Pi = path.sol(t)
        return cset.p(rho, n) + Pi
    lhs = (total(tau + h) - total(tau - h)) / (2 * h)
    rho, n, Pi = path.sol(tau)
    sub = type(path)(tau, rho, n, Pi, rho + cset.p(rho, n) + Pi)
    rhs = d_pressure_total_dtau(cset, sub, np.array([forcing(t) for t in tau]))
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


gammas = st.floats(1.1, 2.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gamma=gammas, coef=st.floats(0.0, 2.0),
       lam_coef=st.floats(0.0, 0.3), frac=st.floats(0.0, 1.0))
def test_inertia_stays_nonnegative(seed, gamma, coef, lam_coef, frac):
    rng = np.random.default_rng(seed)
    # saturating lambda obeys the upper bound when coef gamma / slope < 1
    lam = C.saturating(lam_coef, 1.0) if lam_coef > 0 else None
    cset = ideal_gas_set(gamma=gamma, zeta=C.n_exp(coef=coef), tau0=C.constant(1.0), lam=lam)
    rho0, n0 = 1.0, 0.5
    w = rho0 + cset.p(rho0, n0)
    Pi0 = -frac * w  # frac = 1 starts on the boundary e = 0
    path = integrate_flowline((rho0, n0, Pi0), cset, random_forcing(rng), 5.0)
    assert wec_propagation_check(path).min_e >= -1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), Pi0=st.floats(-0.3, 0.3))
def test_bulk_pressure_respects_a_priori_bound(seed, Pi0):
    cset = viscous_set()
    path = integrate_flowline((1.0, 0.5, Pi0), cset, random_forcing(np.random.default_rng(seed), amp=2.0), 5.0)
    assert path.max_abs_Pi <= pi_bound(Pi0, 1.0) + 1e-8


def test_forcing_is_plain_callable():
    f = FlowlineForcing(lambda t: 2 * t)
    assert f(1.5) == 3.0
