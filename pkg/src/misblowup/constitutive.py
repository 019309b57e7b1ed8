"""
Constitutive relations p, zeta, tau0, lambda as functions of (rho, n).

Every function is a :class:`Field`: a vectorised callable carrying its two
partial derivatives, analytic where the family provides them and central
finite differences otherwise.  A :class:`ConstitutiveSet` bundles the four
fields together with the constants p0, p1 and the declared relaxation-time
floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate


class DegenerateInertiaError(ZeroDivisionError):
    """rho + p + Pi vanished where a sound speed was requested."""


class QuadratureDivergence(ArithmeticError):
    """The integral defining Abar did not settle within the cutoff."""


FD_REL_STEP = 1e-6


def _fd(fn, rho, n, wrt):
    rho = np.asarray(rho, dtype=float)
    n = np.asarray(n, dtype=float)
    if wrt == "rho":
        h = FD_REL_STEP * np.maximum(1.0, np.abs(rho))
        return (fn(rho + h, n) - fn(rho - h, n)) / (2 * h)
    h = FD_REL_STEP * np.maximum(1.0, np.abs(n))
    # stay inside n > 0
    h = np.minimum(h, 0.5 * n)
    return (fn(rho, n + h) - fn(rho, n - h)) / (2 * h)


@dataclass(frozen=True)
class Field:
    """A scalar function of (rho, n) with partial derivatives."""

    name: str
    fn: Callable
    d_rho: Optional[Callable] = None
    d_n: Optional[Callable] = None
    identically_zero: bool = False
    params: dict = field(default_factory=dict, compare=False)
    # signed margin of the family's own admissible region (> 0 inside)
    domain_margin: Optional[Callable] = None

    def __call__(self, rho, n):
        return self.fn(np.asarray(rho, dtype=float), np.asarray(n, dtype=float))

    def partial_rho(self, rho, n):
        if self.d_rho is not None:
            return self.d_rho(np.asarray(rho, dtype=float), np.asarray(n, dtype=float))
        return _fd(self.fn, rho, n, "rho")

    def partial_n(self, rho, n):
        if self.d_n is not None:
            return self.d_n(np.asarray(rho, dtype=float), np.asarray(n, dtype=float))
        return _fd(self.fn, rho, n, "n")


def _full(value):
    return lambda rho, n: np.zeros(np.broadcast(rho, n).shape) + value


# ---------------------------------------------------------------------------
# Registry of named families
# ---------------------------------------------------------------------------

def zero() -> Field:
    return Field("zero", _full(0.0), _full(0.0), _full(0.0), identically_zero=True)


def constant(value: float) -> Field:
    if value == 0.0:
        return zero()
    return Field("constant", _full(value), _full(0.0), _full(0.0), params={"value": value})


def linear(a: float = 0.0, b: float = 0.0, offset: float = 0.0) -> Field:
    """a*rho + b*n + offset."""
    return Field(
        "linear",
        lambda rho, n: a * rho + b * n + offset,
        _full(a),
        _full(b),
        params={"a": a, "b": b, "offset": offset},
    )


def ideal_gas(gamma: float, m: float = 1.0) -> Field:
    """p = (gamma - 1) (rho - m n)."""
    if gamma <= 1.0:
        raise ValueError("adiabatic index must exceed 1")
    g1 = gamma - 1.0
    return Field(
        "ideal_gas",
        lambda rho, n: g1 * (rho - m * n),
        _full(g1),
        _full(-g1 * m),
        params={"gamma": gamma, "m": m},
        # physical ideal-gas states carry positive internal energy: rho > m n
        domain_margin=(lambda rho, n: rho - m * n) if m > 0 else None,
    )


def power_law(coef: float, n_power: float) -> Field:
    """coef * n**n_power."""
    return Field(
        "power_law",
        lambda rho, n: coef * n**n_power + 0 * rho,
        _full(0.0),
        lambda rho, n: coef * n_power * n ** (n_power - 1) + 0 * rho,
        params={"coef": coef, "n_power": n_power},
    )


def n_exp(coef: float = 1.0, scale: float = 1.0) -> Field:
    """coef * n * exp(-n / scale); integrable against dn/n on (0, inf)."""
    return Field(
        "n_exp",
        lambda rho, n: coef * n * np.exp(-n / scale) + 0 * rho,
        _full(0.0),
        lambda rho, n: coef * (1.0 - n / scale) * np.exp(-n / scale) + 0 * rho,
        params={"coef": coef, "scale": scale},
    )


def saturating(coef: float, slope: float) -> Field:
    """coef / sqrt(1 + (slope rho)^2); a lambda compatible with (A5) when
    coef * gamma / slope < 1 for an ideal gas."""
    return Field(
        "saturating",
        lambda rho, n: coef / np.sqrt(1.0 + (slope * rho) ** 2) + 0 * n,
        lambda rho, n: -coef * slope**2 * rho / (1.0 + (slope * rho) ** 2) ** 1.5 + 0 * n,
        _full(0.0),
        params={"coef": coef, "slope": slope},
    )


def load_table(path) -> np.ndarray:
    """Whitespace-separated numeric table, '#' starts a comment."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append([float(tok) for tok in line.split()])
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] not in (2, 3) or len(data) < 2:
        raise ValueError(f"{path}: expected a two- or three-column table")
    return data


def table(path, variable: str = "rho") -> Field:
    """Monotone-cubic (PCHIP) interpolant of a tabulated function.

    Two columns: ``x value`` with x the variable named by ``variable``.
    Three columns: ``rho n value`` on a full rectangular grid.
    Values outside the table are extrapolated by the end polynomials.
    """
    data = load_table(path)
    if data.shape[1] == 2:
        order = np.argsort(data[:, 0])
        pchip = interpolate.PchipInterpolator(data[order, 0], data[order, 1], extrapolate=True)
        dpchip = pchip.derivative()
        if variable == "rho":
            fn = lambda rho, n: pchip(rho) + 0 * n
            d_rho, d_n = (lambda rho, n: dpchip(rho) + 0 * n), _full(0.0)
        elif variable == "n":
            fn = lambda rho, n: pchip(n) + 0 * rho
            d_rho, d_n = _full(0.0), (lambda rho, n: dpchip(n) + 0 * rho)
        else:
            raise ValueError(f"table variable must be 'rho' or 'n', got {variable!r}")
        return Field("table", fn, d_rho, d_n, params={"path": str(path), "variable": variable})

    rhos = np.unique(data[:, 0])
    ns = np.unique(data[:, 1])
    if len(rhos) * len(ns) != len(data):
        raise ValueError(f"{path}: three-column table must cover a rectangular grid")
    grid = np.full((len(rhos), len(ns)), np.nan)
    i = np.searchsorted(rhos, data[:, 0])
    j = np.searchsorted(ns, data[:, 1])
    grid[i, j] = data[:, 2]
    interp = interpolate.RegularGridInterpolator(
        (rhos, ns), grid, method="pchip", bounds_error=False, fill_value=None
    )

    def fn(rho, n):
        rho, n = np.broadcast_arrays(rho, n)
        pts = np.stack([rho.ravel(), n.ravel()], axis=-1)
        return interp(pts).reshape(rho.shape)

    return Field("table", fn, params={"path": str(path)})


FAMILIES = {
    "zero": zero,
    "constant": constant,
    "linear": linear,
    "ideal_gas": ideal_gas,
    "power_law": power_law,
    "n_exp": n_exp,
    "saturating": saturating,
    "table": table,
}


# ---------------------------------------------------------------------------
# The set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstitutiveSet:
    pressure: Field
    zeta: Field
    tau0: Field
    lam: Field = field(default_factory=zero)
    p0: float = 0.0
    p1: float = 0.0
    tau0_floor: float = 0.0  # 0 means "not declared"
    lipschitz_bound: Optional[float] = None
    zt_gradient_bound: float = 1e6
    domain_extension: bool = True

    def p(self, rho, n):
        return self.pressure(rho, n)

    def dp_drho(self, rho, n):
        return self.pressure.partial_rho(rho, n)

    def dp_dn(self, rho, n):
        return self.pressure.partial_n(rho, n)

    def domain_margin(self, rho, n):
        """Margin of the equation of state's admissible region, +inf if unrestricted."""
        if self.pressure.domain_margin is None:
            return np.full(np.broadcast(rho, n).shape, np.inf)
        return self.pressure.domain_margin(rho, n)

    def zeta_over_tau0(self, rho, n):
        if self.zeta.identically_zero:
            return np.zeros(np.broadcast(rho, n).shape)
        return self.zeta(rho, n) / self.tau0(rho, n)

    def zeta_over_tau0_partials(self, rho, n):
        """(d/drho, d/dn) of zeta/tau0 by the quotient rule."""
        if self.zeta.identically_zero:
            z = np.zeros(np.broadcast(rho, n).shape)
            return z, z
        z, t = self.zeta(rho, n), self.tau0(rho, n)
        dr = (self.zeta.partial_rho(rho, n) * t - z * self.tau0.partial_rho(rho, n)) / t**2
        dn = (self.zeta.partial_n(rho, n) * t - z * self.tau0.partial_n(rho, n)) / t**2
        return dr, dn


def ideal_gas_set(gamma=2.0, m=1.0, zeta=None, tau0=None, lam=None, **kw) -> ConstitutiveSet:
    """Convenience constructor; defaults to zeta = 0, tau0 = 1, lambda = 0."""
    return ConstitutiveSet(
        pressure=ideal_gas(gamma, m),
        zeta=zeta if zeta is not None else zero(),
        tau0=tau0 if tau0 is not None else constant(1.0),
        lam=lam if lam is not None else zero(),
        **kw,
    )


# ---------------------------------------------------------------------------
# Sound speeds
# ---------------------------------------------------------------------------

def _cs2(cset: ConstitutiveSet, rho, n, Pi):
    """Sound speed squared without the degeneracy check (inf/nan where e = 0)."""
    e = rho + cset.p(rho, n) + Pi
    with np.errstate(divide="ignore", invalid="ignore"):
        return (cset.zeta_over_tau0(rho, n) + n * cset.dp_dn(rho, n)) / e + cset.dp_drho(rho, n)


def sound_speed_sq(cset: ConstitutiveSet, rho, n, Pi=0.0):
    """Viscous sound speed squared

        zeta / (tau0 e) + dp/drho + n dp/dn / e,   e = rho + p + Pi.

    Raises DegenerateInertiaError where e = 0.
    """
    rho, n, Pi = (np.asarray(a, dtype=float) for a in (rho, n, Pi))
    e = rho + cset.p(rho, n) + Pi
    if np.any(e == 0.0):
        raise DegenerateInertiaError("rho + p + Pi = 0")
    out = _cs2(cset, rho, n, Pi)
    return float(out) if out.ndim == 0 else out


def euler_sound_speed_sq(cset: ConstitutiveSet, rho, n):
    rho, n = np.asarray(rho, dtype=float), np.asarray(n, dtype=float)
    e = rho + cset.p(rho, n)
    if np.any(e == 0.0):
        raise DegenerateInertiaError("rho + p = 0")
    out = cset.dp_drho(rho, n) + n * cset.dp_dn(rho, n) / e
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------

@dataclass
class SampleSpec:
    rho_range: tuple = (0.1, 10.0)
    n_range: tuple = (0.05, 5.0)
    n_rho: int = 60
    n_n: int = 60
    Pi_values: Sequence[float] = (0.0,)
    # decades outside the rectangle used for the "for all rho, n" clauses of (A3)
    probe_decades: int = 12
    tol: float = 1e-12


@dataclass
class Violation:
    assumption: str
    message: str
    point: tuple


@dataclass
class ValidationReport:
    violations: list
    checked: list
    sample: SampleSpec
    inferred_tau0_floor: float
    zt_gradient_sup: float
    notes: list

    @property
    def passed(self) -> bool:
        return not self.violations

    def by_assumption(self, name):
        return [v for v in self.violations if v.assumption == name]

    def summary(self) -> str:
        lines = [f"checked: {', '.join(self.checked)}"]
        if self.passed:
            lines.append("all assumption checks passed")
        for v in self.violations:
            pt = ", ".join(f"{x:.6g}" for x in v.point)
            lines.append(f"{v.assumption}: {v.message} at ({pt})")
        lines.extend(self.notes)
        return "\n".join(lines)


def _first(mask, *coords):
    idx = np.flatnonzero(mask.ravel())[0]
    return tuple(float(np.ravel(c)[idx]) for c in coords)


def physical_mask(cset, rho, n, Pi):
    with np.errstate(invalid="ignore"):
        cs2 = _cs2(cset, rho, n, Pi)
        return (rho > 0) & (n > 0) & (cs2 > 0) & (cs2 < 1) & (cset.domain_margin(rho, n) > 0)


def validate_assumptions(cset: ConstitutiveSet, sample: SampleSpec = None) -> ValidationReport:
    """Check (A1), (A2), (A3), (A5) on a sampled rectangle in (rho, n).

    The clauses quantified over every physical state are tested on the
    sampled points that are physical for at least one of the sampled Pi.
    Violations are collected, never raised.
    """
    s = sample or SampleSpec()
    tol = s.tol
    rho1 = np.linspace(*s.rho_range, s.n_rho)
    n1 = np.geomspace(*s.n_range, s.n_n)
    R, N = np.meshgrid(rho1, n1, indexing="ij")
    phys = np.zeros(R.shape, dtype=bool)
    for Pi in s.Pi_values:
        phys |= physical_mask(cset, R, N, Pi)
    V = []
    notes = []
    p = cset.p(R, N)

    # (A1)
    for mask, msg in (
        (phys & (p < -R - tol), "p < -rho"),
        (phys & (p > R + cset.p1 + tol), "p > rho + p1"),
        (phys & (p <= -cset.p0), "p <= -p0"),
    ):
        if mask.any():
            V.append(Violation("A1", msg, _first(mask, R, N)))

    # (A2)
    dpr, dpn = cset.dp_drho(R, N), cset.dp_dn(R, N)
    dpr, dpn = np.broadcast_to(dpr, R.shape), np.broadcast_to(dpn, R.shape)
    for mask, msg in ((phys & (dpr == 0), "dp/drho = 0"), (phys & (dpn == 0), "dp/dn = 0")):
        if mask.any():
            V.append(Violation("A2", msg, _first(mask, R, N)))
    if cset.lipschitz_bound is not None:
        grad = np.hypot(dpr, dpn)
        mask = grad > cset.lipschitz_bound
        if mask.any():
            V.append(Violation("A2", f"|grad p| exceeds declared bound {cset.lipschitz_bound}",
                               _first(mask, R, N)))
    else:
        notes.append("A2 Lipschitz surrogate skipped: no bound declared")

    # (A3) on the rectangle plus probes far outside it
    dec = np.arange(-s.probe_decades, s.probe_decades + 1, dtype=float)
    probe_rho = np.concatenate([-(10.0 ** dec[dec >= 0]), [0.0], 10.0 ** dec[dec >= 0], rho1])
    probe_n = np.concatenate([10.0**dec, n1])
    PR, PN = np.meshgrid(probe_rho, probe_n, indexing="ij")
    with np.errstate(all="ignore"):
        tau = np.broadcast_to(cset.tau0(PR, PN), PR.shape)
        zeta = np.broadcast_to(cset.zeta(PR, PN), PR.shape)
        dzr, dzn = cset.zeta_over_tau0_partials(PR, PN)
    floor = float(np.nanmin(tau))
    declared = cset.tau0_floor
    if declared > 0:
        mask = ~(tau >= declared)
        if mask.any():
            V.append(Violation("A3", f"tau0 below declared floor {declared}", _first(mask, PR, PN)))
    elif not floor > 1e-8:
        mask = ~(tau > 1e-8)
        V.append(Violation("A3", "tau0 has no positive floor", _first(mask, PR, PN)))
    mask = ~(zeta >= -tol)
    if mask.any():
        V.append(Violation("A3", "zeta < 0", _first(mask, PR, PN)))
    dzr = np.broadcast_to(dzr, PR.shape)
    dzn = np.broadcast_to(dzn, PR.shape)
    mask = ~(dzr >= -tol)
    if mask.any():
        V.append(Violation("A3", "d(zeta/tau0)/drho < 0", _first(mask, PR, PN)))
    gsup = float(np.nanmax(np.abs(dzr) + np.abs(dzn)))
    bad = ~np.isfinite(np.abs(dzr) + np.abs(dzn)) | (np.abs(dzr) + np.abs(dzn) > cset.zt_gradient_bound)
    if bad.any():
        V.append(Violation("A3", "partials of zeta/tau0 not bounded", _first(bad, PR, PN)))

    # (A5)
    if not cset.lam.identically_zero:
        lam = np.broadcast_to(cset.lam(R, N), R.shape)
        mask = phys & ~(lam > 0)
        if mask.any():
            V.append(Violation("A5", "lambda not positive", _first(mask, R, N)))
        with np.errstate(divide="ignore"):
            mask = phys & ~(p + R < 1.0 / lam)
        if mask.any():
            V.append(Violation("A5", "p + rho >= 1/lambda", _first(mask, R, N)))

    if not phys.any():
        notes.append("no sampled point is a physical state")
    return ValidationReport(
        violations=V,
        checked=["A1", "A2", "A3", "A5"],
        sample=s,
        inferred_tau0_floor=floor,
        zt_gradient_sup=gsup,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Abar
# ---------------------------------------------------------------------------

@dataclass
class QuadratureSpec:
    rho_interval: Optional[tuple] = None
    rho_bar: float = 1.0  # default interval is [-10 rho_bar, 10 rho_bar]
    n_rho: int = 201
    tol: float = 1e-11
    safety: float = 1e-9  # relative inflation of the quadrature value
    log_n_cutoffs: Sequence[float] = (5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 300.0)


@dataclass
class AbarResult:
    value: float  # the bound returned to callers
    raw: float
    error: float
    rho_interval: tuple
    cutoff: float

    def __float__(self):
        return self.value


def abar_bound(cset: ConstitutiveSet, spec: QuadratureSpec = None) -> AbarResult:
    """Upper estimate of int_0^inf (1/n) sup_rho |zeta/tau0| dn.

    Integrated in s = log n so the measure becomes ds, over growing symmetric
    windows; the supremum is taken on a rho grid.  Raises QuadratureDivergence
    if the outermost window still changes the result.
    """
    q = spec or QuadratureSpec()
    lo, hi = q.rho_interval or (-10.0 * q.rho_bar, 10.0 * q.rho_bar)
    if cset.zeta.identically_zero:
        return AbarResult(0.0, 0.0, 0.0, (lo, hi), 0.0)
    rhos = np.linspace(lo, hi, q.n_rho)

    def g(s):
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            v = np.abs(cset.zeta_over_tau0(rhos, np.full_like(rhos, math.exp(s))))
        m = float(np.max(v))
        if not math.isfinite(m):
            raise QuadratureDivergence(f"zeta/tau0 not finite at n = exp({s})")
        return m

    total, err = 0.0, 0.0
    prev = 0.0
    increment = math.inf
    for S in q.log_n_cutoffs:
        inc = 0.0
        for a, b in ((prev, S), (-S, -prev)):
            val, e = integrate.quad(g, a, b, limit=400, epsabs=q.tol, epsrel=1e-12)
            inc += val
            err += e
        total += inc
        increment = abs(inc)
        prev = S
    if increment > max(1e-9, 1e-8 * abs(total)):
        raise QuadratureDivergence(
            f"integral still growing at |log n| = {prev}: last window added {increment:.3g}"
        )
    bound = total * (1.0 + q.safety) + err
    return AbarResult(bound, total, err, (lo, hi), prev)
