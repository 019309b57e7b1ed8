"""Pointwise fluid states, physical-state membership and the stress-energy tensor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constitutive import ConstitutiveSet, _cs2, sound_speed_sq

DEFAULT_DELTA = 1e-10


@dataclass(frozen=True)
class FluidState:
    """(rho, n, Pi) plus the spatial velocity components u^k.

    u^0 is derived from the normalisation g(u, u) = -1 and never stored.
    """

    rho: float
    n: float
    Pi: float = 0.0
    u_spatial: tuple = (0.0,)

    @property
    def u_vec(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.u_spatial, dtype=float))

    @property
    def u0(self) -> float:
        return float(np.sqrt(1.0 + self.u_vec @ self.u_vec))

    @property
    def four_velocity(self) -> np.ndarray:
        return np.concatenate([[self.u0], self.u_vec])

    def pressure(self, cset: ConstitutiveSet) -> float:
        return float(cset.p(self.rho, self.n))

    def inertia(self, cset: ConstitutiveSet) -> float:
        """e = rho + p + Pi."""
        return self.rho + self.pressure(cset) + self.Pi

    def cs2(self, cset: ConstitutiveSet) -> float:
        return sound_speed_sq(cset, self.rho, self.n, self.Pi)


@dataclass(frozen=True)
class ConstantState:
    """Equilibrium background: Pi = 0, u = 0."""

    rho_bar: float
    n_bar: float

    def __post_init__(self):
        if not (self.rho_bar > 0 and self.n_bar > 0):
            raise ValueError("background densities must be positive")

    def as_state(self, dim: int = 3) -> FluidState:
        return FluidState(self.rho_bar, self.n_bar, 0.0, (0.0,) * dim)

    def pressure(self, cset: ConstitutiveSet) -> float:
        return float(cset.p(self.rho_bar, self.n_bar))

    def sound_speed(self, cset: ConstitutiveSet) -> float:
        """c = c_s(rho_bar, n_bar, 0); raises ValueError unless 0 < c < 1."""
        cs2 = sound_speed_sq(cset, self.rho_bar, self.n_bar, 0.0)
        if not 0.0 < cs2 < 1.0:
            raise ValueError(f"background sound speed squared {cs2} outside (0, 1)")
        return float(np.sqrt(cs2))


def slack(cset: ConstitutiveSet, rho, n, Pi):
    """min(rho, n, cs^2, 1 - cs^2, domain margin), elementwise.

    The domain margin is the equation of state's own admissible region
    (rho - m n for the ideal gas).  Non-finite sound speeds give -inf.
    """
    cs2 = _cs2(cset, rho, n, Pi)
    s = np.minimum(np.minimum(rho, n), np.minimum(cs2, 1.0 - cs2))
    s = np.minimum(s, cset.domain_margin(rho, n))
    return np.where(np.isfinite(s), s, -np.inf)


def is_physical(state: FluidState, cset: ConstitutiveSet, delta: float = DEFAULT_DELTA):
    """Return (in_P, margin) where margin = min(rho, n, cs^2, 1 - cs^2, ...).

    Membership uses the margin against ``delta`` so the strict inequalities
    defining the physical set are treated as open conditions.
    """
    with np.errstate(all="ignore"):
        margin = float(slack(cset, state.rho, state.n, state.Pi))
    return margin > delta, margin


def wec_value(state: FluidState, cset: ConstitutiveSet) -> float:
    """e = rho + p + Pi; the weak energy condition holds iff e >= 0."""
    return state.inertia(cset)


@dataclass(frozen=True)
class StressEnergy:
    T00: float
    T0k: np.ndarray
    Tjk: np.ndarray

    def full(self) -> np.ndarray:
        d = len(self.T0k)
        T = np.empty((d + 1, d + 1))
        T[0, 0] = self.T00
        T[0, 1:] = T[1:, 0] = self.T0k
        T[1:, 1:] = self.Tjk
        return T

    def contract(self, v) -> float:
        """T^{ab} v_a v_b for a covector v."""
        v = np.asarray(v, dtype=float)
        return float(v @ self.full() @ v)


def stress_energy(state: FluidState, cset: ConstitutiveSet) -> StressEnergy:
    """T^{ab} = rho u^a u^b + (p + Pi)(g^{ab} + u^a u^b), g = diag(-1, 1, ..., 1)."""
    q = state.pressure(cset) + state.Pi
    e = state.rho + q
    u = state.u_vec
    W = state.u0
    # rho + e |u|^2 equals e W^2 - q and is exact at rest
    T00 = state.rho + e * float(u @ u)
    T0k = e * W * u
    Tjk = e * np.outer(u, u) + q * np.eye(len(u))
    return StressEnergy(T00, T0k, Tjk)
