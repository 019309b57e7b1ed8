import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from misblowup import constitutive as C
from misblowup.certifier import ShellData
from misblowup.constitutive import ideal_gas_set
from misblowup.solver import (
    BreakdownReport,
    DiagnosticsRow,
    Grid1D,
    RunOptions,
    Scheme,
    SolutionSnapshot,
    Thresholds,
    VirialConstants,
    characteristic_speeds,
    check_finite_propagation,
    check_q_bounds,
    constant_snapshot,
    detect_breakdown,
    diagnostics,
    pi_bound_for,
    shell_snapshot,
    simulate,
    smoothness_measure,
    step,
)
from misblowup.state import ConstantState

BG = ConstantState(1.0, 0.5)


def viscous():
    return ideal_gas_set(gamma=4 / 3, zeta=C.n_exp(), tau0=C.constant(1.0))


def pulse(grid, centre=0.5, width=0.1, amp=0.05, vel=0.2, Pi=0.0):
    """Smooth compact-looking bump in every field; u is odd in planar mode."""
    r = grid.radius()
    g = np.exp(-(((r - centre) / width) ** 2))
    u = vel * g * (np.sign(grid.x) if not grid.radial else 1.0)
    return SolutionSnapshot(0.0, BG.rho_bar * (1 + amp * g), BG.n_bar * (1 + amp * g), Pi * g, u)


def evolve(snap, grid, cset, t, scheme=Scheme()):
    res = simulate(snap, grid, cset, BG, RunOptions(t_max=t, scheme=scheme, output_every=1))
    return res


def restrict(Y):
    return 0.5 * (Y[:, 0::2] + Y[:, 1::2])


@pytest.mark.parametrize("kind", ["planar", "radial"])
def test_constant_state_is_preserved(kind):
    grid = Grid1D(kind, 64, 2.0)
    snap = constant_snapshot(grid, BG)
    out = snap
    for _ in range(10):
        out = step(out, grid, viscous(), BG, 0.4 * grid.dx, Scheme(eps_d=0.1))
    assert np.max(np.abs(out.as_array() - snap.as_array())) <= 1e-13


@pytest.mark.parametrize("kind", ["planar", "radial"])
def test_smooth_pulse_self_convergence(kind):
    cset = viscous()
    finals = []
    # same cell width in both modes
    for N in (200, 400, 800):
        grid = Grid1D(kind, N if kind == "radial" else 2 * N, 1.5)
        finals.append(evolve(pulse(grid, Pi=0.02), grid, cset, 0.3).final.as_array())
    e1 = np.max(np.abs(restrict(finals[1]) - finals[0]))
    e2 = np.max(np.abs(restrict(finals[2]) - finals[1]))
    assert math.log2(e1 / e2) >= 1.9


def test_zero_viscosity_keeps_bulk_pressure_zero():
    grid = Grid1D("radial", 200, 1.5)
    res = evolve(pulse(grid), grid, ideal_gas_set(gamma=4 / 3), 0.3)
    assert np.max(np.abs(res.final.Pi)) <= 1e-12


@pytest.mark.parametrize("kind", ["planar", "radial"])
def test_inviscid_run_matches_frozen_bulk_pressure_system(kind):
    cset = ideal_gas_set(gamma=4 / 3)
    grid = Grid1D(kind, 200, 1.5)
    a = evolve(pulse(grid), grid, cset, 0.3, Scheme(eps_d=0.1)).final
    b = evolve(pulse(grid), grid, cset, 0.3, Scheme(eps_d=0.1, euler=True)).final
    assert np.max(np.abs(a.as_array() - b.as_array())) <= 1e-10


def test_planar_and_radial_agree_far_from_origin():
    cset = viscous()
    gaps = []
    for centre in (5.0, 10.0):
        out = []
        for kind in ("planar", "radial"):
            grid = Grid1D(kind, 800 if kind == "radial" else 1600, centre + 1.0)
            snap = evolve(pulse(grid, centre=centre, width=0.15), grid, cset, 0.2).final
            window = (grid.x > centre - 0.6) & (grid.x < centre + 0.6)
            out.append(snap.as_array()[:, window])
        gaps.append(np.max(np.abs(out[0] - out[1])))
    # the geometric source scales like 1/r
    assert gaps[1] < 0.7 * gaps[0]
    assert gaps[0] < 0.05


def test_energy_and_baryon_number_conserved():
    cset = viscous()
    grid = Grid1D("radial", 400, 1.5)
    snap = pulse(grid, Pi=0.02)
    res = evolve(snap, grid, cset, 0.3)
    assert res.energy_drift <= 1e-4

    def baryons(s):
        return float(np.sum(s.n * np.sqrt(1 + s.u**2) * grid.volumes))

    assert baryons(res.final) == pytest.approx(baryons(snap), rel=1e-5)


def test_characteristic_speeds_subluminal():
    grid = Grid1D("radial", 100, 1.5)
    snap = pulse(grid, vel=3.0)
    assert np.all(characteristic_speeds(viscous(), snap) < 1)


def test_diagnostics_of_constant_state_vanish():
    grid = Grid1D("radial", 100, 2.0)
    snaps = [constant_snapshot(grid, BG) for _ in range(4)]
    for i, s in enumerate(snaps):
        s.t = 0.1 * i
    rows = diagnostics(snaps, grid, viscous(), BG)
    for r in rows:
        assert r.E == 0 and r.Q == 0 and r.T_kin == 0 and r.I == 0
    assert all(r.virial_residual == 0 and r.Idot_minus_Q == 0 for r in rows[1:-1])
    assert math.isnan(rows[0].virial_residual)


def test_resting_snapshot_has_no_momentum():
    grid = Grid1D("radial", 100, 2.0)
    snap = pulse(grid, vel=0.0)
    row = diagnostics([snap], grid, viscous(), BG)[0]
    assert row.Q == 0 and row.T_kin == 0


def test_grid_cell_integrals_exact():
    grid = Grid1D("radial", 37, 2.0)
    assert grid.volumes.sum() == pytest.approx(4 * math.pi / 3 * 8, rel=1e-14)
    assert grid.moment(2).sum() == pytest.approx(4 * math.pi / 5 * 32, rel=1e-14)
    planar = Grid1D("planar", 40, 2.0)
    assert planar.moment(2).sum() == pytest.approx(2 * 8 / 3, rel=1e-14)


def row(Q, T, t=0.0):
    return DiagnosticsRow(t=t, E=1.0, I=0.0, Q=Q, T_kin=T)


def test_q_bounds_force_zero_momentum_at_rest():
    R = lambda t: 1.0
    assert check_q_bounds(row(0.0, 0.0), 1.0, R, 1.0)
    assert not check_q_bounds(row(1e-3, 0.0), 1.0, R, 1.0)


def test_q_bounds_force_zero_momentum_at_maximal_kinetic_energy():
    R = lambda t: 1.0
    T = 2 * (1.0 + 1.0)
    assert check_q_bounds(row(0.0, T), 1.0, R, 1.0)
    assert not check_q_bounds(row(0.1, T), 1.0, R, 1.0)


def test_constant_state_never_breaks_down():
    grid = Grid1D("radial", 100, 2.0)
    snap = constant_snapshot(grid, BG)
    ref = float(np.max(smoothness_measure(snap, grid)))
    rep = detect_breakdown(snap, grid, viscous(), c1_ref=ref, pi_bound=3.0)
    assert not rep.triggered


def test_monitors_fire_on_synthetic_defects():
    cset = viscous()
    grid = Grid1D("radial", 100, 2.0)
    base = pulse(grid)
    ref = float(np.max(smoothness_measure(base, grid)))

    bad = pulse(grid)
    bad.rho[40] = np.nan
    assert detect_breakdown(bad, grid, cset, c1_ref=ref).cause == "numerical_failure"

    bad = pulse(grid)
    bad.rho[40] = 0.4  # below m n
    rep = detect_breakdown(bad, grid, cset, c1_ref=ref)
    assert rep.cause == "left_physical_set" and rep.cell == 40

    bad = pulse(grid, Pi=0.05)
    assert detect_breakdown(bad, grid, cset, c1_ref=ref, pi_bound=0.01).cause == "pi_bound_violation"

    bad = pulse(grid)
    bad.u[50:] += 0.5
    loose = Thresholds(grad_factor=5.0)
    assert not detect_breakdown(base, grid, cset, loose, c1_ref=ref).triggered
    assert detect_breakdown(bad, grid, cset, loose, c1_ref=ref).cause == "gradient_blowup"


def test_divergent_abar_disables_bulk_pressure_monitor():
    cset = ideal_gas_set(gamma=4 / 3, zeta=C.constant(0.01))
    assert pi_bound_for(cset, 0.0) is None
    grid = Grid1D("radial", 100, 1.5)
    res = simulate(pulse(grid), grid, cset, BG, RunOptions(t_max=0.05))
    assert not res.breakdown.pi_bound_enabled
    assert any("disabled" in n for n in res.breakdown.notes)


def test_finite_propagation_exact_at_start():
    grid = Grid1D("radial", 200, 2.0)
    snap = shell_snapshot(grid, ShellData(1.0, 0.1, 5.0, BG))
    dev, ok = check_finite_propagation(snap, grid, BG, 1.0, 0.5)
    assert dev == 0.0 and ok


def test_leakage_shrinks_with_resolution():
    cset = viscous()
    c = BG.sound_speed(cset)
    leaks = []
    for N in (200, 400):
        grid = Grid1D("radial", N, 2.0)
        snap = pulse(grid, centre=0.6, width=0.08)
        snap.rho[grid.x > 1.0] = BG.rho_bar
        snap.n[grid.x > 1.0] = BG.n_bar
        snap.u[grid.x > 1.0] = 0.0
        res = simulate(snap, grid, cset, BG, RunOptions(t_max=0.3, output_every=5),
                       consts=VirialConstants(1.0, c, math.nan))
        leaks.append(res.max_leak)
    assert leaks[1] < leaks[0]


def test_report_summary_text():
    assert BreakdownReport().summary() == "no breakdown detected"
    rep = BreakdownReport(True, 0.5, "wec_violation", 3, 0.1, -1.0)
    assert "wec_violation" in rep.summary()


def test_run_lands_on_final_time_with_even_rows():
    grid = Grid1D("planar", 64, 2.0)
    res = simulate(pulse(grid), grid, viscous(), BG, RunOptions(t_max=0.1234, output_every=2))
    assert res.final.t == 0.1234
    t = np.array([r.t for r in res.rows])
    assert np.allclose(np.diff(t), t[1] - t[0])


def test_scheme_and_thresholds_validate():
    with pytest.raises(ValueError):
        Scheme(cfl=1.5)
    with pytest.raises(ValueError):
        Thresholds(grad_factor=0.5)
    with pytest.raises(ValueError):
        Grid1D("spherical", 100, 1.0)


@settings(max_examples=25, deadline=None)
@given(rho=st.floats(0.6, 5.0), frac=st.floats(0.05, 0.9), kind=st.sampled_from(["planar", "radial"]))
def test_any_constant_state_is_an_equilibrium(rho, frac, kind):
    bg = ConstantState(rho, frac * rho)
    grid = Grid1D(kind, 32, 1.0)
    snap = constant_snapshot(grid, bg)
    out = step(snap, grid, viscous(), bg, 0.4 * grid.dx, Scheme(eps_d=0.1))
    assert np.max(np.abs(out.as_array() - snap.as_array())) <= 1e-13 * max(1.0, rho)


@settings(max_examples=20, deadline=None)
@given(amp=st.floats(0.0, 0.1), vel=st.floats(-0.5, 0.5))
def test_normalised_momentum_bounded(amp, vel):
    grid = Grid1D("radial", 200, 2.0)
    cset = viscous()
    snap = pulse(grid, amp=amp, vel=vel)
    c = BG.sound_speed(cset)
    consts = VirialConstants(1.0, c, 4 * math.pi / 3 * (1 + 3))
    res = simulate(snap, grid, cset, BG, RunOptions(t_max=0.1, output_every=5), consts=consts)
    assert all(-1 - 1e-9 <= r.z <= 1 + 1e-9 for r in res.rows)
