"""
Method-of-lines evolution of the viscous fluid in planar (x in [-L, L]) or
spherically symmetric (r in [0, L]) geometry, with virial diagnostics and
breakdown monitors.

Unknowns are the primitive fields (rho, n, Pi, u) with u the single spatial
component of the four-velocity and W = sqrt(1 + u^2).  Writing k = 0 for
planar and k = 2 for radial symmetry,

    theta = (u/W) d_t u + d_r u + k u / r,
    D0 d_t u = -e u (1 - cs^2) d_r u - d_r q + u e cs^2 k u / r + u f,
    W d_t rho = -u d_r rho - e theta,
    W d_t n   = -u d_r n   - n theta,
    W d_t Pi  = -u d_r Pi  - (zeta/tau0) theta - f,

with e = rho + p + Pi, q = p + Pi, f = (Pi + lambda Pi^2)/tau0 and
D0 = (e/W)(1 + u^2 (1 - cs^2)).  The momentum line is the radial component
of e u.grad u + (g + u u).grad q = 0 after eliminating u.grad q through the
energy and relaxation equations; the others are the flow-line equations
written in Eulerian form.

Space: cell centres, two ghost cells, second-order central differences plus
optional fourth-difference (Kreiss-Oliger) dissipation.  The origin is a
reflecting boundary (scalars even, u odd) so no cell sits on r = 0; the
outer boundary holds the background state.  Time: classical RK4 with the
fixed step dt = cfl * dx, which satisfies the CFL bound because every
characteristic speed of a physical state is below 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .constitutive import ConstitutiveSet, abar_bound, QuadratureDivergence
from .riemann import quasilinear_matrices  # noqa: F401  (planar characteristic form)
from .state import ConstantState, FluidState, slack

CAUSES = ("gradient_blowup", "left_physical_set", "wec_violation",
          "pi_bound_violation", "numerical_failure")
FIELDS = ("rho", "n", "Pi", "u")
NG = 2


# ---------------------------------------------------------------------------
# Grid and snapshots
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    """Planar cells on [-L, L] or radial cells on [0, L]."""

    kind: str
    N: int
    L: float

    def __post_init__(self):
        if self.kind not in ("planar", "radial"):
            raise ValueError(f"grid kind must be 'planar' or 'radial', got {self.kind!r}")
        if self.N < 8:
            raise ValueError("need at least 8 cells")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def radial(self) -> bool:
        return self.kind == "radial"

    @property
    def k(self) -> int:
        return 2 if self.radial else 0

    @property
    def dim(self) -> int:
        """Spatial dimension of the integrals: 3 for radial, 1 for planar."""
        return 3 if self.radial else 1

    @property
    def dx(self) -> float:
        return (self.L if self.radial else 2 * self.L) / self.N

    @property
    def x(self) -> np.ndarray:
        left = 0.0 if self.radial else -self.L
        return left + (np.arange(self.N) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        left = 0.0 if self.radial else -self.L
        return left + np.arange(self.N + 1) * self.dx

    def moment(self, power: int) -> np.ndarray:
        """Exact cell integrals of |x|^power dx (4 pi r^2 dr in radial mode)."""
        a, b = self.edges[:-1], self.edges[1:]
        if self.radial:
            m = power + 3
            return 4 * math.pi * (b**m - a**m) / m
        if power == 0:
            return b - a
        m = power + 1
        return (np.sign(b) * np.abs(b) ** m - np.sign(a) * np.abs(a) ** m) / m

    @property
    def volumes(self) -> np.ndarray:
        return self.moment(0)

    def radius(self) -> np.ndarray:
        return np.abs(self.x)


@dataclass
class SolutionSnapshot:
    """Cell values of (rho, n, Pi, u) at time t."""

    t: float
    rho: np.ndarray
    n: np.ndarray
    Pi: np.ndarray
    u: np.ndarray

    @classmethod
    def from_array(cls, t, Y):
        return cls(t, Y[0].copy(), Y[1].copy(), Y[2].copy(), Y[3].copy())

    def as_array(self) -> np.ndarray:
        return np.stack([self.rho, self.n, self.Pi, self.u])

    def state(self, i: int) -> FluidState:
        return FluidState(float(self.rho[i]), float(self.n[i]), float(self.Pi[i]), (float(self.u[i]),))

    def states(self):
        return [self.state(i) for i in range(len(self.rho))]


def constant_snapshot(grid: Grid1D, background: ConstantState) -> SolutionSnapshot:
    z = np.zeros(grid.N)
    return SolutionSnapshot(0.0, z + background.rho_bar, z + background.n_bar, z.copy(), z.copy())


def shell_snapshot(grid: Grid1D, data) -> SolutionSnapshot:
    """Sample shell initial data at the cell centres; planar mode uses |x|.

    In planar mode u is odd in x, so the two halves move apart.
    """
    r = grid.radius()
    u = data.u(r) * (np.sign(grid.x) if not grid.radial else 1.0)
    return SolutionSnapshot(0.0, data.rho(r).astype(float), data.n(r).astype(float),
                            data.Pi(r).astype(float), np.asarray(u, dtype=float))


# ---------------------------------------------------------------------------
# Spatial operator
# ---------------------------------------------------------------------------

def _pad(Y, grid: Grid1D, bg):
    N = Y.shape[1]
    P = np.empty((Y.shape[0], N + 2 * NG))
    P[:, NG:NG + N] = Y
    P[:, N + NG:] = bg[:, None]
    if grid.radial:
        P[:, NG - 1] = Y[:, 0]
        P[:, NG - 2] = Y[:, 1]
        P[-1, :NG] *= -1.0  # u is odd through the origin
    else:
        P[:, :NG] = bg[:, None]
    return P


def _d1(P, dx):
    return (P[:, NG + 1:-NG + 1] - P[:, NG - 1:-NG - 1]) / (2 * dx)


def _dissipation(P, dx, eps_d):
    if eps_d == 0:
        return 0.0
    d4 = P[:, 4:] - 4 * P[:, 3:-1] + 6 * P[:, 2:-2] - 4 * P[:, 1:-3] + P[:, :-4]
    return -eps_d / (16 * dx) * d4


def _geometric(u, grid):
    if grid.k == 0:
        return np.zeros_like(u)
    return grid.k * u / grid.x


def rhs_mis(Y, grid: Grid1D, cset: ConstitutiveSet, bg_vec, eps_d=0.0):
    """Time derivative of (rho, n, Pi, u) for the viscous system."""
    P = _pad(Y, grid, bg_vec)
    drho, dn, dPi, du = _d1(P, grid.dx)
    rho, n, Pi, u = Y

    p = cset.p(rho, n)
    dpr = cset.dp_drho(rho, n)
    dpn = cset.dp_dn(rho, n)
    zt = cset.zeta_over_tau0(rho, n)
    e = rho + p + Pi
    cs2 = dpr + (n * dpn + zt) / e
    f = (Pi + cset.lam(rho, n) * Pi**2) / cset.tau0(rho, n)

    W = np.sqrt(1.0 + u * u)
    geo = _geometric(u, grid)
    dq = dpr * drho + dpn * dn + dPi
    D0 = e / W * (1.0 + u * u * (1.0 - cs2))

    ut = (-e * u * (1.0 - cs2) * du - dq + u * e * cs2 * geo + u * f) / D0
    theta = u / W * ut + du + geo
    out = np.stack([
        (-u * drho - e * theta) / W,
        (-u * dn - n * theta) / W,
        (-u * dPi - zt * theta - f) / W,
        ut,
    ])
    return out + _dissipation(P, grid.dx, eps_d)


def rhs_euler(Y, grid: Grid1D, cset: ConstitutiveSet, bg_vec, eps_d=0.0):
    """Relativistic Euler right-hand side; the Pi row is held at zero."""
    P = _pad(Y, grid, bg_vec)
    drho, dn, _, du = _d1(P, grid.dx)
    rho, n, _, u = Y

    h = rho + cset.p(rho, n)
    a = cset.dp_drho(rho, n)
    b = cset.dp_dn(rho, n)
    c2 = a + n * b / h
    W = np.sqrt(1.0 + u * u)
    geo = _geometric(u, grid)

    # h W d_t u - u c2 h (u/W) d_t u = -h u d_r u - d_r p + c2 h u (d_r u + geo)
    acc = (-h * u * (1.0 - c2) * du - (a * drho + b * dn) + c2 * h * u * geo) / (
        h / W * (1.0 + u * u * (1.0 - c2))
    )
    div = u / W * acc + du + geo
    out = np.stack([
        (-u * drho - h * div) / W,
        (-u * dn - n * div) / W,
        np.zeros_like(rho),
        acc,
    ])
    diss = _dissipation(P, grid.dx, eps_d)
    if not np.isscalar(diss):
        diss[2] = 0.0
    return out + diss


def characteristic_speeds(cset: ConstitutiveSet, snap: SolutionSnapshot) -> np.ndarray:
    """Largest |(u +- cs W)/(W +- cs u)| per cell."""
    with np.errstate(all="ignore"):
        cs = np.sqrt(np.clip(_cs2_cells(cset, snap), 0.0, None))
        W = np.sqrt(1.0 + snap.u**2)
        lp = (snap.u + cs * W) / (W + cs * snap.u)
        lm = (snap.u - cs * W) / (W - cs * snap.u)
    return np.maximum(np.abs(lp), np.abs(lm))


def _cs2_cells(cset, snap):
    e = snap.rho + cset.p(snap.rho, snap.n) + snap.Pi
    with np.errstate(all="ignore"):
        return cset.dp_drho(snap.rho, snap.n) + (
            snap.n * cset.dp_dn(snap.rho, snap.n) + cset.zeta_over_tau0(snap.rho, snap.n)
        ) / e


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scheme:
    cfl: float = 0.4
    eps_d: float = 0.0
    euler: bool = False  # evolve with Pi frozen at zero

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.eps_d < 0:
            raise ValueError("dissipation strength must be nonnegative")


def background_vector(background: ConstantState) -> np.ndarray:
    return np.array([background.rho_bar, background.n_bar, 0.0, 0.0])


def step(snapshot: SolutionSnapshot, grid: Grid1D, cset: ConstitutiveSet,
         background: ConstantState, dt: float, scheme: Scheme = Scheme()) -> SolutionSnapshot:
    """One classical RK4 step.  Non-finite output is returned as is; the
    breakdown monitor reports it as a numerical failure."""
    rhs = rhs_euler if scheme.euler else rhs_mis
    bg = background_vector(background)
    Y = snapshot.as_array()
    with np.errstate(all="ignore"):
        k1 = rhs(Y, grid, cset, bg, scheme.eps_d)
        k2 = rhs(Y + 0.5 * dt * k1, grid, cset, bg, scheme.eps_d)
        k3 = rhs(Y + 0.5 * dt * k2, grid, cset, bg, scheme.eps_d)
        k4 = rhs(Y + dt * k3, grid, cset, bg, scheme.eps_d)
        Y = Y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return SolutionSnapshot.from_array(snapshot.t + dt, Y)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

DIAGNOSTIC_COLUMNS = ("t", "E", "I", "Q", "T_kin", "virial_residual", "Idot_minus_Q",
                      "max_grad_u", "min_cs2", "max_cs2", "min_e", "max_abs_Pi",
                      "support_radius", "z")


@dataclass
class DiagnosticsRow:
    t: float
    E: float
    I: float
    Q: float
    T_kin: float
    virial_residual: float = math.nan
    Idot_minus_Q: float = math.nan
    max_grad_u: float = math.nan
    min_cs2: float = math.nan
    max_cs2: float = math.nan
    min_e: float = math.nan
    max_abs_Pi: float = math.nan
    support_radius: float = math.nan
    z: float = math.nan
    # virial source dim * int (q - p_bar) dx; not an output column
    pressure_term: float = field(default=math.nan, repr=False)

    def values(self) -> list:
        return [getattr(self, c) for c in DIAGNOSTIC_COLUMNS]


@dataclass(frozen=True)
class VirialConstants:
    """R(t) = R0 + c t and the constant b in the Q-bounds."""

    R0: float
    c: float
    b: float

    def R(self, t):
        return self.R0 + self.c * t


def deviation(snap: SolutionSnapshot, background: ConstantState) -> np.ndarray:
    """Cell-wise max |field - background| over (rho, n, Pi, u)."""
    return np.max(np.abs(snap.as_array() - background_vector(background)[:, None]), axis=0)


def support_radius(snap: SolutionSnapshot, grid: Grid1D, background: ConstantState,
                   tol: float = 1e-6) -> float:
    """Largest |x| of a cell deviating from the background by more than tol."""
    dev = deviation(snap, background)
    idx = np.nonzero(dev > tol)[0]
    return float(grid.radius()[idx].max()) if len(idx) else 0.0


def diagnostics_row(snap: SolutionSnapshot, grid: Grid1D, cset: ConstitutiveSet,
                    background: ConstantState, consts: Optional[VirialConstants] = None,
                    support_tol: float = 1e-6) -> DiagnosticsRow:
    """Instantaneous diagnostics; the residual columns are filled later by
    :func:`finalize_diagnostics` from the I history."""
    rho, n, Pi, u = snap.rho, snap.n, snap.Pi, snap.u
    q = cset.p(rho, n) + Pi
    e = rho + q
    W = np.sqrt(1.0 + u * u)
    T00 = rho + e * u * u
    vol = grid.volumes
    E = float(np.sum((T00 - background.rho_bar) * vol))
    I = 0.5 * float(np.sum((T00 - background.rho_bar) * grid.moment(2)))
    Q = float(np.sum(u * W * e * _first_moment_weights(grid)))
    T_kin = float(np.sum(e * u * u * vol))
    pbar = background.pressure(cset)
    P_term = grid.dim * float(np.sum((q - pbar) * vol))
    cs2 = _cs2_cells(cset, snap)
    row = DiagnosticsRow(
        t=snap.t, E=E, I=I, Q=Q, T_kin=T_kin,
        max_grad_u=float(np.max(np.abs(np.gradient(u, grid.dx)))),
        min_cs2=float(np.min(cs2)), max_cs2=float(np.max(cs2)),
        min_e=float(np.min(e)), max_abs_Pi=float(np.max(np.abs(Pi))),
        support_radius=support_radius(snap, grid, background, support_tol),
        pressure_term=P_term,
    )
    if consts is not None:
        R = consts.R(snap.t)
        row.z = Q / (R * (E + consts.b * R**3))
    return row


def _first_moment_weights(grid: Grid1D) -> np.ndarray:
    """Cell integrals of x (planar) or of r * 4 pi r^2 (radial)."""
    if grid.radial:
        return grid.moment(1)
    a, b = grid.edges[:-1], grid.edges[1:]
    return (b * b - a * a) / 2


def finalize_diagnostics(rows: list) -> list:
    """Fill Idot_minus_Q and virial_residual by centred differences of I.

    Rows must be equally spaced in time.  The first and last rows lack a
    neighbour and keep NaN.
    """
    if len(rows) < 3:
        return rows
    t = np.array([r.t for r in rows])
    I = np.array([r.I for r in rows])
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("diagnostic rows must be equally spaced in time")
    h = h[0]
    for j in range(1, len(rows) - 1):
        Idot = (I[j + 1] - I[j - 1]) / (2 * h)
        Iddot = (I[j + 1] - 2 * I[j] + I[j - 1]) / (h * h)
        rows[j].Idot_minus_Q = Idot - rows[j].Q
        rows[j].virial_residual = abs(Iddot - rows[j].T_kin - rows[j].pressure_term)
    return rows


def diagnostics(history: list, grid: Grid1D, cset: ConstitutiveSet, background: ConstantState,
                consts: Optional[VirialConstants] = None, support_tol: float = 1e-6) -> list:
    """Diagnostics rows for an equally spaced sequence of snapshots."""
    rows = [diagnostics_row(s, grid, cset, background, consts, support_tol) for s in history]
    return finalize_diagnostics(rows)


def check_q_bounds(row: DiagnosticsRow, b_const: float, R_of_t, E: float, tol: float = 1e-8) -> bool:
    """Q^2 <= R^2 (2(E + b R^3) - T) T  and  |Q| <= R (E + b R^3), R = R_of_t(row.t).

    ``tol`` is relative to the scale of each right-hand side.
    """
    R = R_of_t(row.t)
    M = E + b_const * R**3
    T = row.T_kin
    rhs1 = R * R * (2 * M - T) * T
    rhs2 = R * M
    ok1 = row.Q**2 <= rhs1 + tol * max(1.0, (R * M) ** 2)
    ok2 = abs(row.Q) <= rhs2 + tol * max(1.0, abs(rhs2))
    return bool(ok1 and ok2)


# ---------------------------------------------------------------------------
# Breakdown monitors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    grad_factor: float = 1e3      # trigger at this multiple of the initial C1 measure
    delta: float = 1e-6           # physical-set slack and WEC tolerance
    leak_tol: float = 1e-6        # finite-propagation tolerance
    n_floor: float = 1e-12

    def __post_init__(self):
        if not self.grad_factor > 1:
            raise ValueError("grad_factor must exceed 1")
        if not self.delta > 0 or not self.leak_tol > 0:
            raise ValueError("tolerances must be positive")


@dataclass
class BreakdownReport:
    triggered: bool = False
    time: float = math.nan
    cause: Optional[str] = None
    cell: Optional[int] = None
    position: float = math.nan
    value: float = math.nan
    pi_bound_enabled: bool = True
    notes: list = field(default_factory=list)

    def summary(self) -> str:
        if not self.triggered:
            return "no breakdown detected"
        return (f"breakdown at t = {self.time!r}: {self.cause} in cell {self.cell} "
                f"(x = {self.position!r}, value = {self.value!r})")


def _one_sided_max(f, dx):
    """max over cells of the larger one-sided second-order difference."""
    fp = (-3 * f[:-2] + 4 * f[1:-1] - f[2:]) / (2 * dx)
    fm = (3 * f[2:] - 4 * f[1:-1] + f[:-2]) / (2 * dx)
    g = np.zeros_like(f)
    g[:-2] = np.abs(fp)
    g[2:] = np.maximum(g[2:], np.abs(fm))
    return g


def smoothness_measure(snap: SolutionSnapshot, grid: Grid1D) -> np.ndarray:
    """Per-cell C1 size: |(n, rho, Pi)| + |d(n, rho, Pi)| + max(|du|, |u/r|).

    The velocity enters through its gradient only, so the measure is the
    quantity whose blowup ends C1 continuation.
    """
    dx = grid.dx
    c1 = np.zeros(grid.N)
    for f in (snap.n, snap.rho, snap.Pi):
        c1 = np.maximum(c1, np.abs(f) + _one_sided_max(f, dx))
    gu = _one_sided_max(snap.u, dx)
    if grid.radial:
        gu = np.maximum(gu, np.abs(snap.u / grid.x))
    return c1 + gu


@dataclass
class BreakdownMonitor:
    """Stateful monitor; the C1 baselines are taken from the first snapshot."""

    grid: Grid1D
    cset: ConstitutiveSet
    thresholds: Thresholds = Thresholds()
    pi_bound: Optional[float] = None  # None disables the Pi-bound check
    c1_ref: float = math.nan

    def baseline(self, snap: SolutionSnapshot):
        self.c1_ref = float(np.max(smoothness_measure(snap, self.grid)))

    def check(self, snap: SolutionSnapshot) -> BreakdownReport:
        return detect_breakdown(snap, self.grid, self.cset, self.thresholds,
                                self.c1_ref, self.pi_bound)


def _report(snap, grid, cause, idx, value, pi_enabled):
    return BreakdownReport(True, snap.t, cause, int(idx), float(grid.x[idx]), float(value),
                           pi_bound_enabled=pi_enabled)


def detect_breakdown(snap: SolutionSnapshot, grid: Grid1D, cset: ConstitutiveSet,
                     thresholds: Thresholds = Thresholds(), c1_ref: float = math.inf,
                     pi_bound: Optional[float] = None) -> BreakdownReport:
    """First monitor that fires, checked in the order: non-finite values or
    n below the floor, physical-set slack, weak energy condition, Pi bound,
    C1 growth."""
    pi_enabled = pi_bound is not None
    Y = snap.as_array()
    bad = ~np.all(np.isfinite(Y), axis=0) | (snap.n <= thresholds.n_floor)
    if bad.any():
        i = int(np.argmax(bad))
        return _report(snap, grid, "numerical_failure", i, snap.n[i], pi_enabled)

    with np.errstate(all="ignore"):
        s = slack(cset, snap.rho, snap.n, snap.Pi)
    i = int(np.argmin(s))
    if s[i] < thresholds.delta:
        return _report(snap, grid, "left_physical_set", i, s[i], pi_enabled)

    e = snap.rho + cset.p(snap.rho, snap.n) + snap.Pi
    i = int(np.argmin(e))
    if e[i] < -thresholds.delta:
        return _report(snap, grid, "wec_violation", i, e[i], pi_enabled)

    if pi_enabled:
        i = int(np.argmax(np.abs(snap.Pi)))
        if abs(snap.Pi[i]) > pi_bound + thresholds.delta:
            return _report(snap, grid, "pi_bound_violation", i, snap.Pi[i], pi_enabled)

    measure = smoothness_measure(snap, grid)
    i = int(np.argmax(measure))
    if measure[i] > thresholds.grad_factor * c1_ref:
        return _report(snap, grid, "gradient_blowup", i, measure[i], pi_enabled)

    return BreakdownReport(pi_bound_enabled=pi_enabled)


def check_finite_propagation(snap: SolutionSnapshot, grid: Grid1D, background: ConstantState,
                             R0: float, c: float, tol: float = 1e-6):
    """(max deviation from the background outside |x| <= R0 + c t, passed)."""
    outside = grid.radius() > R0 + c * snap.t
    if not outside.any():
        return 0.0, True
    dev = float(np.max(deviation(snap, background)[outside]))
    return dev, dev <= tol


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunOptions:
    t_max: float
    scheme: Scheme = Scheme()
    thresholds: Thresholds = Thresholds()
    output_every: int = 10          # steps between diagnostics rows
    snapshot_every: int = 0         # diagnostics rows between stored snapshots; 0 keeps none
    stop_on_breakdown: bool = True

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.output_every < 1:
            raise ValueError("output_every must be at least 1")


@dataclass
class RunResult:
    grid: Grid1D
    rows: list
    breakdown: BreakdownReport
    snapshots: list
    final: SolutionSnapshot
    steps: int
    dt: float
    max_leak: float = 0.0           # max deviation outside R0 + c t, until the trigger
    q_bounds_ok: Optional[bool] = None
    consts: Optional[VirialConstants] = None

    @property
    def energy_drift(self) -> float:
        E = np.array([r.E for r in self.rows])
        return float(np.max(np.abs(E - E[0])) / max(1.0, abs(E[0])))


def simulate(initial: SolutionSnapshot, grid: Grid1D, cset: ConstitutiveSet,
             background: ConstantState, options: RunOptions,
             consts: Optional[VirialConstants] = None, pi_bound: Optional[float] = None,
             progress=None) -> RunResult:
    """Evolve until t_max or the first breakdown trigger.

    ``consts`` enables z(t), the Q-bound check and the finite-propagation
    monitor; ``pi_bound`` enables the Pi-bound monitor.
    """
    dt = options.scheme.cfl * grid.dx
    monitor = BreakdownMonitor(grid, cset, options.thresholds, pi_bound)
    monitor.baseline(initial)
    report = monitor.check(initial)
    if pi_bound is None:
        report.notes.append("Pi-bound monitor disabled")

    snap = initial
    rows = [diagnostics_row(snap, grid, cset, background, consts, options.thresholds.leak_tol)]
    snaps = [snap] if options.snapshot_every else []
    max_leak = 0.0
    # full steps of cfl * dx keep output times aligned across resolutions;
    # only the last step is shortened to land on t_max
    nsteps = int(math.ceil(options.t_max / dt - 1e-9))
    steps = 0
    while steps < nsteps and not (report.triggered and options.stop_on_breakdown):
        h = min(dt, options.t_max - steps * dt)
        snap = step(snap, grid, cset, background, h, options.scheme)
        steps += 1
        snap.t = options.t_max if steps == nsteps else steps * dt
        report_new = monitor.check(snap)
        if report_new.triggered and not report.triggered:
            report = report_new
            if pi_bound is None:
                report.notes.append("Pi-bound monitor disabled")
        if consts is not None and not report.triggered:
            leak, _ = check_finite_propagation(snap, grid, background, consts.R0, consts.c)
            max_leak = max(max_leak, leak)
        full = h == dt  # rows stay equally spaced; a shortened last step is not sampled
        if full and steps % options.output_every == 0 and not report.triggered:
            rows.append(diagnostics_row(snap, grid, cset, background, consts,
                                        options.thresholds.leak_tol))
            if options.snapshot_every and (len(rows) - 1) % options.snapshot_every == 0:
                snaps.append(snap)
        if progress is not None:
            progress(snap, report)
    finalize_diagnostics(rows)

    q_ok = None
    if consts is not None and math.isfinite(consts.b):
        E0 = rows[0].E
        q_ok = all(check_q_bounds(r, consts.b, consts.R, E0) for r in rows)
    return RunResult(grid, rows, report, snaps, snap, steps, dt, max_leak, q_ok, consts)


def pi_bound_for(cset: ConstitutiveSet, max_abs_Pi0: float):
    """|Pi(0)|_inf + 3 Abar, or None when Abar diverges."""
    try:
        return max_abs_Pi0 + 3 * float(abar_bound(cset))
    except QuadratureDivergence:
        return None
