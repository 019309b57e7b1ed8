"""
Shell initial data and the sufficient blowup conditions.

A :class:`ShellData` is a constant background plus an outward radial
velocity sigma * u1 supported in the shell R0 - ell <= r <= R0.  ``certify``
evaluates every constant of the virial argument and reports whether the
three Q-conditions and the shell-ratio condition hold, giving an upper bound
T_upper = (Rbar - R0)/c on the breakdown time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .constitutive import (
    ConstitutiveSet,
    QuadratureDivergence,
    QuadratureSpec,
    SampleSpec,
    abar_bound,
    validate_assumptions,
)
from .state import ConstantState, slack

QUAD_ABS = 1e-10
QUAD_REL = 1e-12


def smooth_step(x):
    """C-infinity transition from 0 (x <= 0) to 1 (x >= 1)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class ShellData:
    R0: float
    ell: float
    sigma: float
    background: ConstantState
    smooth_w: Optional[float] = None  # None -> ell/10; 0 -> sharp indicator
    rho_profile: Optional[Callable] = None
    n_profile: Optional[Callable] = None
    Pi_profile: Optional[Callable] = None
    perturbation: Optional[Callable] = None  # added to u1; must vanish outside B_R0

    def __post_init__(self):
        if not self.R0 > 0:
            raise ValueError("R0 must be positive")
        if not 0 < self.ell < self.R0:
            raise ValueError("need 0 < ell < R0")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0 <= self.width < self.ell / 2:
            raise ValueError("smoothing width must lie in [0, ell/2)")

    @property
    def width(self) -> float:
        return self.ell / 10 if self.smooth_w is None else self.smooth_w

    @property
    def breakpoints(self) -> list:
        w = self.width
        inner = self.R0 - self.ell
        return sorted({inner, inner + w, self.R0 - w, self.R0})

    def u1(self, r):
        """Radial component of the unit-amplitude velocity profile."""
        r = np.asarray(r, dtype=float)
        inner, w = self.R0 - self.ell, self.width
        if w == 0:
            g = ((r >= inner) & (r <= self.R0)).astype(float)
        else:
            g = smooth_step((r - inner) / w) * smooth_step((self.R0 - r) / w)
        if self.perturbation is not None:
            g = g + np.where(r < self.R0, self.perturbation(r), 0.0)
        return g

    def u(self, r):
        return self.sigma * self.u1(r)

    def rho(self, r):
        if self.rho_profile is None:
            return np.full(np.shape(r), self.background.rho_bar)
        return np.where(np.asarray(r) < self.R0, self.rho_profile(r), self.background.rho_bar)

    def n(self, r):
        if self.n_profile is None:
            return np.full(np.shape(r), self.background.n_bar)
        return np.where(np.asarray(r) < self.R0, self.n_profile(r), self.background.n_bar)

    def Pi(self, r):
        if self.Pi_profile is None:
            return np.zeros(np.shape(r))
        return np.where(np.asarray(r) < self.R0, self.Pi_profile(r), 0.0)

    def e(self, r, cset):
        rho, n = self.rho(r), self.n(r)
        return rho + cset.p(rho, n) + self.Pi(r)

    def max_abs_Pi(self, samples: int = 4001) -> float:
        if self.Pi_profile is None:
            return 0.0
        r = np.linspace(0, self.R0, samples)
        return float(np.max(np.abs(self.Pi(r))))

    def with_sigma(self, sigma: float) -> "ShellData":
        return replace(self, sigma=sigma)


def threshold(c: float) -> float:
    """(c+1)^2 / (2 (c^2 + 1)); lies in [1/2, 1] for c in [0, 1]."""
    return (c + 1) ** 2 / (2 * (c * c + 1))


def _radial(f, data: ShellData, R: Optional[float] = None):
    """4 pi int_0^R f(r) r^2 dr by adaptive Gauss-Kronrod; returns (value, error)."""
    R = data.R0 if R is None else R
    pts = [p for p in data.breakpoints if 0 < p < R]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(
            lambda r: float(f(r)) * r * r, 0.0, R, points=pts or None,
            epsabs=QUAD_ABS, epsrel=QUAD_REL, limit=500,
        )
    return 4 * math.pi * val, 4 * math.pi * err


def shell_ratio(data: ShellData, cset: ConstitutiveSet):
    """[int x.u1 |u1| e dx] / [R0 int |u1|^2 e dx]; returns (ratio, error estimate)."""
    num, en = _radial(lambda r: r * data.u1(r) * abs(data.u1(r)) * data.e(r, cset), data)
    den, ed = _radial(lambda r: data.u1(r) ** 2 * data.e(r, cset), data)
    if den == 0:
        raise ZeroDivisionError("u1 vanishes identically")
    den *= data.R0
    ratio = num / den
    return ratio, abs(ratio) * (en / abs(num) if num else 0.0) + abs(ratio) * data.R0 * ed / den


def energy_E0(data: ShellData, cset: ConstitutiveSet, method: str = "reduced"):
    """E = int_{B_R0} e |u|^2 + rho - rho_bar dx  (method='reduced'),
    or int (T^00 - rho_bar) dx with T^00 = e W^2 - (p + Pi)  (method='T00').
    Returns (value, error)."""
    rb = data.background.rho_bar
    if method == "reduced":
        f = lambda r: data.e(r, cset) * data.u(r) ** 2 + data.rho(r) - rb
    elif method == "T00":
        def f(r):
            rho, n, Pi = data.rho(r), data.n(r), data.Pi(r)
            q = cset.p(rho, n) + Pi
            return (rho + q) * (1 + data.u(r) ** 2) - q - rb
    else:
        raise ValueError(method)
    return _radial(f, data)


def q_initial(data: ShellData, cset: ConstitutiveSet):
    """Q(0) = int x.u sqrt(1 + |u|^2) e dx; returns (value, error)."""
    return _radial(lambda r: r * data.u(r) * math.sqrt(1 + data.u(r) ** 2) * data.e(r, cset), data)


def kinetic_T0(data: ShellData, cset: ConstitutiveSet):
    return _radial(lambda r: data.e(r, cset) * data.u(r) ** 2, data)


def constants_bk(cset: ConstitutiveSet, data: ShellData, abar: float):
    """b = 4pi/3 (rho_bar + p1 + |Pi0|_inf + 3 Abar),  k = 4pi/3 (|Pi0|_inf + 3 Abar + p0 + p_bar)."""
    pim = data.max_abs_Pi()
    pbar = data.background.pressure(cset)
    b = 4 * math.pi / 3 * (data.background.rho_bar + cset.p1 + pim + 3 * abar)
    k = 4 * math.pi / 3 * (pim + 3 * abar + cset.p0 + pbar)
    return b, k


def _quad(f, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-10, limit=500)


def mu_integral(c: float) -> float:
    """int_{threshold(c)}^1 dz / (1 - sqrt(1 - z^2) - c z)."""
    if not 0 <= c < 1:
        raise ValueError(f"need 0 <= c < 1, got {c}")
    val, _ = _quad(lambda z: 1.0 / (1.0 - math.sqrt(1.0 - z * z) - c * z), threshold(c), 1.0)
    return val


def mu_for_c(c: float, margin: float = 0.05) -> float:
    """mu = exp(I(c)) (1 + margin) so that I(c) < log mu strictly."""
    return math.exp(mu_integral(c)) * (1 + margin)


@dataclass
class BlowupConditions:
    A: float
    B: float
    z0: float  # nan when the discriminant is negative
    cond1: bool
    cond2: bool
    cond2_integral: float
    log_ratio: float

    def h(self, z):
        return 1 - np.sqrt(1 - np.asarray(z) ** 2) - self.A * np.asarray(z) - self.B


def blowup_conditions(E, b, k, c, R0, Rbar) -> BlowupConditions:
    if not E > 0:
        raise ValueError("blowup conditions need E > 0")
    denom = E + b * Rbar**3
    A = c * (1 + 3 * b * Rbar**3 / denom)
    B = k * Rbar**3 / denom
    disc = A * A + 2 * B - B * B
    log_ratio = math.log(Rbar / R0)
    if disc < 0:
        return BlowupConditions(A, B, math.nan, False, False, math.nan, log_ratio)
    z0 = (A * (1 - B) + math.sqrt(disc)) / (A * A + 1)
    cond1 = disc > 0 and A + B < 1 and z0 < 1
    if not cond1:
        return BlowupConditions(A, B, z0, False, False, math.nan, log_ratio)
    try:
        val, _ = _quad(lambda z: 1.0 / (1.0 - math.sqrt(1.0 - z * z) - A * z - B), 0.5 * (1 + z0), 1.0)
    except integrate.IntegrationWarning:
        val = math.inf
    return BlowupConditions(A, B, z0, cond1, val < log_ratio, val, log_ratio)


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

@dataclass
class Certificate:
    sigma: float = math.nan
    R0: float = math.nan
    ell: float = math.nan
    smooth_w: float = math.nan
    rho_bar: float = math.nan
    n_bar: float = math.nan
    c: float = math.nan
    Abar: float = math.nan
    E: float = math.nan
    E_err: float = math.nan
    Q0: float = math.nan
    Q0_err: float = math.nan
    T_kin0: float = math.nan
    b: float = math.nan
    k: float = math.nan
    threshold: float = math.nan
    ratio: float = math.nan
    ratio_err: float = math.nan
    mu: float = math.nan
    Rbar: float = math.nan
    A: float = math.nan
    B: float = math.nan
    z0: float = math.nan
    cond2_integral: float = math.nan
    cond3_lhs: float = math.nan
    T_upper: float = math.nan
    sigma0: float = math.nan
    assumptions_ok: bool = False
    ratio_condition: bool = False
    cond1: bool = False
    cond2: bool = False
    cond3: bool = False
    valid: bool = False
    reasons: list = field(default_factory=list)

    def recheck(self) -> "Certificate":
        """Recompute every flag from the stored constants alone."""
        out = replace(self, reasons=list(self.reasons))
        out.threshold = threshold(self.c)
        out.ratio_condition = self.ratio > out.threshold
        if self.E > 0 and 0 < self.c < 1:
            bc = blowup_conditions(self.E, self.b, self.k, self.c, self.R0, self.Rbar)
            out.A, out.B, out.z0 = bc.A, bc.B, bc.z0
            out.cond1, out.cond2, out.cond2_integral = bc.cond1, bc.cond2, bc.cond2_integral
            out.cond3_lhs = self.Q0 / (self.R0 * (self.E + self.b * self.R0**3))
            out.cond3 = bool(bc.cond1 and out.cond3_lhs > 0.5 * (1 + bc.z0))
        out.valid = bool(out.assumptions_ok and out.ratio_condition and out.cond1 and out.cond2 and out.cond3)
        return out

    # key = value serialisation; repr(float) is the shortest round-trip form
    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "reasons":
                for reason in v:
                    lines.append(f"reason = {reason}")
            elif isinstance(v, bool):
                lines.append(f"{f.name} = {'true' if v else 'false'}")
            else:
                lines.append(f"{f.name} = {float(v)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Certificate":
        kinds = {f.name: f.type for f in fields(cls)}
        cert = cls()
        cert.reasons = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key == "reason":
                cert.reasons.append(val)
            elif key not in kinds:
                raise ValueError(f"unknown certificate key {key!r}")
            elif kinds[key] in ("bool", bool):
                setattr(cert, key, val == "true")
            else:
                setattr(cert, key, float(val))
        return cert


@dataclass
class CertifyOptions:
    mu_margin: float = 0.05
    sample: Optional[SampleSpec] = None  # default: a decade around the background
    quadrature: Optional[QuadratureSpec] = None
    admissibility_samples: int = 2001


def default_sample(bg: ConstantState) -> SampleSpec:
    return SampleSpec(rho_range=(bg.rho_bar / 10, 10 * bg.rho_bar), n_range=(bg.n_bar / 10, 10 * bg.n_bar))


def certify(data: ShellData, cset: ConstitutiveSet, options: CertifyOptions = None) -> Certificate:
    """Evaluate all constants and conditions for one shell; never raises."""
    opt = options or CertifyOptions()
    bg = data.background
    cert = Certificate(sigma=data.sigma, R0=data.R0, ell=data.ell, smooth_w=data.width,
                       rho_bar=bg.rho_bar, n_bar=bg.n_bar)
    cert.reasons = []
    why = cert.reasons

    report = validate_assumptions(cset, opt.sample or default_sample(bg))
    cert.assumptions_ok = report.passed
    for v in report.violations:
        why.append(f"{v.assumption}: {v.message} at {tuple(round(x, 6) for x in v.point)}")

    r = np.linspace(0, data.R0, opt.admissibility_samples)
    with np.errstate(all="ignore"):
        ok_data = np.all(slack(cset, data.rho(r), data.n(r), data.Pi(r)) > 0) and np.all(data.e(r, cset) > 0)
    if not ok_data:
        cert.assumptions_ok = False
        why.append("initial data not admissible (outside physical states or e <= 0)")

    try:
        cert.c = bg.sound_speed(cset)
    except ValueError as exc:
        why.append(str(exc))
        return cert
    try:
        qs = opt.quadrature or QuadratureSpec(rho_bar=bg.rho_bar)
        cert.Abar = abar_bound(cset, qs).value
    except QuadratureDivergence as exc:
        cert.assumptions_ok = False
        why.append(f"A4: {exc}")
        return cert

    cert.E, cert.E_err = energy_E0(data, cset)
    cert.Q0, cert.Q0_err = q_initial(data, cset)
    cert.T_kin0, _ = kinetic_T0(data, cset)
    cert.b, cert.k = constants_bk(cset, data, cert.Abar)
    try:
        cert.ratio, cert.ratio_err = shell_ratio(data, cset)
    except ZeroDivisionError as exc:
        why.append(str(exc))
    try:
        cert.mu = mu_for_c(cert.c, opt.mu_margin)
    except (ValueError, integrate.IntegrationWarning) as exc:
        why.append(f"mu integral failed: {exc}")
        return cert
    cert.Rbar = cert.mu * data.R0
    cert.T_upper = (cert.Rbar - data.R0) / cert.c
    if not cert.E > 0:
        why.append(f"E = {cert.E:.6g} is not positive")
        cert.threshold = threshold(cert.c)
        cert.ratio_condition = cert.ratio > cert.threshold
        return cert

    out = cert.recheck()
    why = out.reasons
    if not out.ratio_condition:
        why.append(f"shell ratio {out.ratio:.6g} <= threshold {out.threshold:.6g}")
    if not out.cond1:
        why.append(f"condition 1 fails (A = {out.A:.6g}, B = {out.B:.6g}, z0 = {out.z0:.6g})")
    elif not out.cond2:
        why.append(f"condition 2 fails: integral {out.cond2_integral:.6g} >= log(Rbar/R0)")
    if not out.cond3:
        why.append(f"condition 3 fails: Q0/(R0(E + b R0^3)) = {out.cond3_lhs:.6g}")
    return out


@dataclass
class Sigma0Result:
    found: bool
    sigma0: float
    certificate: Optional[Certificate]
    sweep: list  # (sigma, valid) in evaluation order
    diagnostics: list


def find_sigma0(template: ShellData, cset: ConstitutiveSet, sigma_range=(1.0, 2.0**20),
                rel_tol: float = 0.01, options: CertifyOptions = None) -> Sigma0Result:
    """Doubling sweep from sigma_range[0], then bisection to rel_tol.

    Monotonicity in sigma is not assumed: the smallest certified sigma
    encountered is returned, and the full sweep is kept.
    """
    lo, hi = sigma_range
    sweep, certs = [], {}

    def run(s):
        cert = certify(template.with_sigma(s), cset, options)
        sweep.append((s, cert.valid))
        certs[s] = cert
        return cert.valid

    prev, s, hit = None, lo, None
    while s <= hi * (1 + 1e-12):
        if run(s):
            hit = s
            break
        prev, s = s, 2 * s
    if hit is None:
        last = certs[sweep[-1][0]]
        return Sigma0Result(False, math.nan, None, sweep, list(last.reasons))
    if prev is not None:
        a, b = prev, hit
        while (b - a) / b > rel_tol:
            mid = 0.5 * (a + b)
            if run(mid):
                b = mid
            else:
                a = mid
    best = min(s for s, ok in sweep if ok)
    cert = certs[best]
    cert.sigma0 = best
    return Sigma0Result(True, best, cert, sweep, [])


def stability_check(data: ShellData, cset: ConstitutiveSet, delta: float,
                    options: CertifyOptions = None) -> list:
    """Certify sup-norm-delta perturbations of u1 supported in the shell.

    Returns [(label, valid)]; the perturbations are smooth and vanish where
    the unperturbed profile does.
    """
    base = data.u1
    inner = data.R0 - data.ell
    shapes = {
        "+delta": lambda r: delta * base(r),
        "-delta": lambda r: -delta * base(r),
        "wiggle": lambda r: delta * np.sin(2 * np.pi * (np.asarray(r) - inner) / data.ell) * base(r),
    }
    out = []
    for label, f in shapes.items():
        pert = replace(data, perturbation=f)
        out.append((label, certify(pert, cset, options).valid))
    return out
