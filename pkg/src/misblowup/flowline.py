"""
Lagrangian dynamics along one flow line with a prescribed expansion scalar,
and the auxiliary transport equation  T F = zeta/tau0  solved along its
characteristics.

Along a flow line parametrised by proper time tau, with theta = div u,

    n'   = -n theta
    rho' = (rho + p + Pi) n'/n
    Pi'  = zeta n' / (tau0 n) - (1 + lambda Pi) Pi / tau0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .constitutive import ConstitutiveSet, _cs2

DEFAULT_EPS = 1e-3


class StiffFailure(RuntimeError):
    """The adaptive integrator's step size collapsed."""

    def __init__(self, last_tau, path):
        super().__init__(f"step size collapsed at tau = {last_tau:.6g}")
        self.last_tau = last_tau
        self.path = path


@dataclass(frozen=True)
class FlowlineForcing:
    """Prescribed expansion scalar theta(tau)."""

    theta: Callable[[float], float]
    description: str = ""

    def __call__(self, tau):
        return self.theta(tau)


def constant_forcing(value: float) -> FlowlineForcing:
    return FlowlineForcing(lambda tau: value, f"constant({value})")


def sine_forcing(amp: float, omega: float, offset: float = 0.0, phase: float = 0.0) -> FlowlineForcing:
    return FlowlineForcing(
        lambda tau: offset + amp * math.sin(omega * tau + phase),
        f"sine(amp={amp}, omega={omega}, offset={offset}, phase={phase})",
    )


def random_forcing(rng: np.random.Generator, amp: float = 0.5, modes: int = 4) -> FlowlineForcing:
    """Smooth random theta: a short random trigonometric series."""
    a = rng.uniform(-amp, amp, modes) / modes
    w = rng.uniform(0.2, 4.0, modes)
    ph = rng.uniform(0, 2 * np.pi, modes)
    a0 = rng.uniform(-amp, amp) / 2

    def theta(tau):
        return a0 + float(np.sum(a * np.sin(w * tau + ph)))

    return FlowlineForcing(theta, "random")


@dataclass
class FlowlinePath:
    tau: np.ndarray
    rho: np.ndarray
    n: np.ndarray
    Pi: np.ndarray
    e: np.ndarray
    status: str = "ok"  # ok | n_floor
    F: Optional[np.ndarray] = None
    sol: object = field(default=None, repr=False)

    @property
    def min_e(self) -> float:
        return float(np.min(self.e))

    @property
    def max_abs_Pi(self) -> float:
        return float(np.max(np.abs(self.Pi)))


def flowline_rhs(cset: ConstitutiveSet, forcing: FlowlineForcing):
    def rhs(tau, y):
        rho, n, Pi = y
        th = forcing(tau)
        tau0 = float(cset.tau0(rho, n))
        e = rho + float(cset.p(rho, n)) + Pi
        lam = float(cset.lam(rho, n))
        return [-e * th, -n * th, -float(cset.zeta_over_tau0(rho, n)) * th - (1 + lam * Pi) * Pi / tau0]

    return rhs


def integrate_flowline(
    state0,
    cset: ConstitutiveSet,
    forcing: FlowlineForcing,
    tau_max: float,
    tol: float = 1e-9,
    atol: float = 1e-13,
    n_floor: Optional[float] = None,
    method: str = "DOP853",
) -> FlowlinePath:
    """Integrate (rho, n, Pi) along a flow line from tau = 0 to tau_max.

    ``state0`` is a FluidState or an (rho, n, Pi) triple.  Samples are the
    accepted steps of the adaptive integrator.  Integration stops early with
    status ``n_floor`` if n drops to the floor (default 1e-12 n(0)).
    """
    if hasattr(state0, "rho"):
        y0 = [state0.rho, state0.n, state0.Pi]
    else:
        y0 = [float(v) for v in state0]
    if not y0[1] > 0:
        raise ValueError("n(0) must be positive")
    floor = n_floor if n_floor is not None else 1e-12 * y0[1]

    def hit_floor(tau, y):
        return y[1] - floor

    hit_floor.terminal = True
    hit_floor.direction = -1

    res = solve_ivp(
        flowline_rhs(cset, forcing),
        (0.0, tau_max),
        y0,
        method=method,
        rtol=tol,
        atol=atol,
        events=hit_floor,
        dense_output=True,
    )
    rho, n, Pi = res.y
    e = rho + cset.p(rho, n) + Pi
    path = FlowlinePath(res.t, rho, n, Pi, np.asarray(e, dtype=float), sol=res.sol)
    if res.status == -1:
        raise StiffFailure(float(res.t[-1]), path)
    if res.status == 1:
        path.status = "n_floor"
    return path


@dataclass(frozen=True)
class WecCheck:
    ok: bool
    min_e: float


def wec_propagation_check(path: FlowlinePath, tol_wec: float = 1e-10) -> WecCheck:
    """e(tau) >= -tol_wec at every sample of the path."""
    m = path.min_e
    return WecCheck(m >= -tol_wec, m)


def pi_bound(Pi0: float, abar: float) -> float:
    """A-priori bound |Pi(tau)| <= |Pi(0)| + 3 Abar along any admissible flow line."""
    return abs(Pi0) + 3.0 * float(abar)


def d_pressure_total_dtau(cset: ConstitutiveSet, path: FlowlinePath, theta) -> np.ndarray:
    """Right side of d(p + Pi)/dtau = cs^2 e n'/n - (1 + lambda Pi) Pi / tau0."""
    rho, n, Pi, e = path.rho, path.n, path.Pi, path.e
    cs2 = _cs2(cset, rho, n, Pi)
    return -cs2 * e * theta - (1 + cset.lam(rho, n) * Pi) * Pi / cset.tau0(rho, n)


# ---------------------------------------------------------------------------
# Characteristics of T F = zeta / tau0
# ---------------------------------------------------------------------------

def F0(rho, Pi, eps: float = DEFAULT_EPS):
    """Initial datum on {n = n0}: bounded by eps, decreasing in Pi, rho-independent."""
    return -eps * np.tanh(Pi) + 0.0 * rho


def dF0_dPi(rho, Pi, eps: float = DEFAULT_EPS):
    return -eps / np.cosh(Pi) ** 2 + 0.0 * rho


def _char_rhs(cset):
    # independent variable s = log n; y stacks (rho, Pi, F) for k curves
    def rhs(s, y):
        rho, Pi = y[0::3], y[1::3]
        n = math.exp(s)
        zt = cset.zeta_over_tau0(rho, n)
        out = np.empty_like(y)
        out[0::3] = rho + cset.p(rho, n) + Pi
        out[1::3] = zt
        out[2::3] = zt
        return out

    return rhs


def _trace(cset, rho0, n0, Pi0, eps, s_grid, tol):
    """Integrate k characteristics through (rho0[j], n0, Pi0[j]) together, out
    to both ends of s_grid; one shared step sequence keeps finite differences
    across neighbouring curves smooth.

    Returns (values at s_grid [k, 3, len], dense pieces, reached_all).
    """
    rho0, Pi0 = np.atleast_1d(rho0).astype(float), np.atleast_1d(Pi0).astype(float)
    k = len(rho0)
    s0 = math.log(n0)
    y0 = np.stack([rho0, Pi0, F0(rho0, Pi0, eps)], axis=1).ravel()
    out = np.full((3 * k, len(s_grid)), np.nan)
    pieces = []
    complete = True
    for side in (s_grid >= s0, s_grid < s0):
        if not side.any():
            continue
        target = s_grid[side]
        end = target.max() if target.max() >= s0 else target.min()
        t_eval = np.sort(target) if end >= s0 else np.sort(target)[::-1]
        if end == s0:
            out[:, side] = y0[:, None]
            continue
        res = solve_ivp(
            _char_rhs(cset), (s0, end), y0, method="DOP853", rtol=tol, atol=tol * 1e-2,
            t_eval=t_eval, dense_output=True,
        )
        if res.status != 0 or len(res.t) < len(t_eval):
            complete = False
        idx = np.searchsorted(s_grid, res.t)
        out[:, idx] = res.y
        pieces.append((min(s0, end), max(s0, end), res.sol))
    return out.reshape(k, 3, len(s_grid)), pieces, complete


@dataclass
class CharacteristicResult:
    anchor: tuple
    n: np.ndarray
    rho: np.ndarray
    Pi: np.ndarray
    F: np.ndarray
    dF_dPi: np.ndarray
    dF_drho: np.ndarray
    complete: bool
    eps: float
    pieces: list = field(default_factory=list, repr=False)

    def dense(self, s):
        """(rho, Pi, F) at log n = s from the integrator's dense output."""
        for a, b, sol in self.pieces:
            if a <= s <= b:
                return sol(s)[:3]
        raise ValueError(f"log n = {s} outside the traced curve")


def solve_F_characteristic(
    cset: ConstitutiveSet,
    anchor: tuple,
    eps: float = DEFAULT_EPS,
    n_range: tuple = (1e-3, 1e3),
    samples: int = 201,
    tol: float = 1e-12,
    fd_rel: float = 1e-4,
) -> CharacteristicResult:
    """Trace the characteristic of T F = zeta/tau0 through anchor = (rho0, n0, Pi0).

    Along the curve F = F0(rho0, Pi0) + int_{n0}^{n} zeta/(z tau0) dz.  The
    gradient of F in (rho, Pi) at fixed n is recovered from four neighbouring
    characteristics (rho0 +- h, Pi0 +- h): pulling back through the finite
    difference Jacobian of the flow map at each n.
    """
    rho0, n0, Pi0 = (float(v) for v in anchor)
    if not n0 > 0 or not (0 < n_range[0] < n_range[1]):
        raise ValueError("need n0 > 0 and 0 < n_lo < n_hi")
    s_grid = np.unique(np.concatenate([np.linspace(math.log(n_range[0]), math.log(n_range[1]), samples),
                                       [math.log(n0)]]))
    hr = fd_rel * (1 + abs(rho0))
    hp = fd_rel * (1 + abs(Pi0))
    # the anchor curve and its four neighbours rho0 +- hr, Pi0 +- hp
    rhos = np.array([rho0, rho0 + hr, rho0 - hr, rho0, rho0])
    Pis = np.array([Pi0, Pi0, Pi0, Pi0 + hp, Pi0 - hp])
    curves, pieces, complete = _trace(cset, rhos, n0, Pis, eps, s_grid, tol)
    base = curves[0]
    nb = dict(zip(("r+", "r-", "p+", "p-"), curves[1:]))
    # flow map Jacobian d(rho_n, Pi_n)/d(rho0, Pi0) and d(F)/d(rho0, Pi0)
    J = np.empty((len(s_grid), 2, 2))
    J[:, 0, 0] = (nb["r+"][0] - nb["r-"][0]) / (2 * hr)
    J[:, 1, 0] = (nb["r+"][1] - nb["r-"][1]) / (2 * hr)
    J[:, 0, 1] = (nb["p+"][0] - nb["p-"][0]) / (2 * hp)
    J[:, 1, 1] = (nb["p+"][1] - nb["p-"][1]) / (2 * hp)
    gH = np.stack([(nb["r+"][2] - nb["r-"][2]) / (2 * hr), (nb["p+"][2] - nb["p-"][2]) / (2 * hp)], axis=-1)
    with np.errstate(invalid="ignore"):
        grad = np.einsum("ki,kij->kj", gH, np.linalg.inv(J))
    keep = np.all(np.isfinite(base), axis=0)
    if not keep.all():
        complete = False
    return CharacteristicResult(
        anchor=(rho0, n0, Pi0),
        n=np.exp(s_grid[keep]),
        rho=base[0, keep],
        Pi=base[1, keep],
        F=base[2, keep],
        dF_dPi=grad[keep, 1],
        dF_drho=grad[keep, 0],
        complete=complete,
        eps=eps,
        pieces=pieces,
    )


def transport_residual(cset: ConstitutiveSet, res: CharacteristicResult, h: float = 1e-4) -> np.ndarray:
    """|dF/dlog n - (zeta/tau0) o Y| at interior samples, dF by central differences."""
    out = []
    for n in res.n:
        s = math.log(n)
        # both stencil points must lie on one dense piece
        piece = next((sol for a, b, sol in res.pieces if a <= s - h and s + h <= b), None)
        if piece is None:
            continue
        fp, fm = piece(s + h)[2], piece(s - h)[2]
        rho, Pi = piece(s)[:2]
        out.append(abs((fp - fm) / (2 * h) - float(cset.zeta_over_tau0(rho, n))))
    return np.array(out)


def F_value(cset: ConstitutiveSet, point: tuple, n0: float, eps: float = DEFAULT_EPS, tol: float = 1e-12) -> float:
    """F at an arbitrary (rho, n, Pi): trace its characteristic back to n = n0."""
    rho, n, Pi = (float(v) for v in point)
    s, s0 = math.log(n), math.log(n0)
    if s == s0:
        return float(F0(rho, Pi, eps))
    res = solve_ivp(_char_rhs(cset), (s, s0), np.array([rho, Pi, 0.0]), method="DOP853",
                    rtol=tol, atol=tol * 1e-2)
    rho0, Pi0, G = res.y[:, -1]
    # G accumulated from n back to n0, so F(point) = F0 + int_{n0}^{n} = F0 - G
    return float(F0(rho0, Pi0, eps)) - float(G)
