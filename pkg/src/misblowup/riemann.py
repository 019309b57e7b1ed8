"""
Characteristic structure of the planar viscous system in the unknowns
Psi = (rho, u1, q), q = p + Pi, and the test showing that Riemann
invariants cannot exist unless the pressure is constant.

The analysis is barotropic: p, zeta, tau0 and lambda are read as functions
of rho alone.  Our constitutive sets depend on (rho, n), so every function
here takes a frozen particle density ``n`` (default 1).

All functions broadcast over array arguments; matrices come back with the
3x3 block in the last two axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constitutive import ConstitutiveSet

DEFAULT_N = 1.0


def _arrays(*xs):
    return np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in xs])


def barotropic_c2(cset: ConstitutiveSet, rho, q, n=DEFAULT_N):
    """c^2 = dp/drho + zeta / (tau0 (rho + q))."""
    rho, q = _arrays(rho, q)
    w = rho + q
    if np.any(w == 0):
        raise ZeroDivisionError("rho + q vanished")
    return cset.dp_drho(rho, n) + cset.zeta_over_tau0(rho, n) / w


def relaxation_source(cset: ConstitutiveSet, rho, q, n=DEFAULT_N):
    """f = (Pi + lambda Pi^2) / tau0 with Pi = q - p."""
    rho, q = _arrays(rho, q)
    Pi = q - cset.p(rho, n)
    return (Pi + cset.lam(rho, n) * Pi**2) / cset.tau0(rho, n)


def quasilinear_matrices(cset: ConstitutiveSet, rho, u1, q, n=DEFAULT_N):
    """(A0, A1, B) with A0 d_t Psi + A1 d_x Psi + B = 0."""
    rho, u1, q = _arrays(rho, u1, q)
    u0 = np.sqrt(1.0 + u1**2)
    w = rho + q
    c2 = barotropic_c2(cset, rho, q, n)
    z = np.zeros_like(rho)
    one = np.ones_like(rho)

    A0 = np.stack(
        [
            np.stack([u0, w * u1 / u0, z], -1),
            np.stack([z, w / u0, u1 / u0], -1),
            np.stack([z, c2 * w * u1 / u0, u0], -1),
        ],
        -2,
    )
    A1 = np.stack(
        [
            np.stack([u1, w, z], -1),
            np.stack([z, w * u1 / u0**2, one], -1),
            np.stack([z, c2 * w, u1], -1),
        ],
        -2,
    )
    B = np.stack([z, z, relaxation_source(cset, rho, q, n)], -1)
    return A0, A1, B


def det_A0(cset: ConstitutiveSet, rho, u1, q, n=DEFAULT_N):
    """Closed form (rho + q)(1 + u1^2 (1 - c^2)) / u0; nonzero for c^2 < 1."""
    rho, u1, q = _arrays(rho, u1, q)
    u0 = np.sqrt(1.0 + u1**2)
    c2 = barotropic_c2(cset, rho, q, n)
    return (rho + q) * (1.0 + u1**2 * (1.0 - c2)) / u0


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues lambdas[..., A] and left eigenvectors left_vectors[..., A, :]."""

    lambdas: np.ndarray
    left_vectors: np.ndarray
    c: np.ndarray
    h: np.ndarray

    def determinant(self) -> np.ndarray:
        return np.linalg.det(self.left_vectors)


def eigensystem(cset: ConstitutiveSet, rho, u1, q, n=DEFAULT_N) -> EigenSystem:
    rho, u1, q = _arrays(rho, u1, q)
    c2 = barotropic_c2(cset, rho, q, n)
    if np.any(c2 < 0) or np.any(c2 > 1):
        raise ValueError("eigensystem needs 0 <= c^2 <= 1")
    c = np.sqrt(c2)
    u0 = np.sqrt(1.0 + u1**2)
    # |u1| < u0, so c u1 +- u0 cannot vanish for c <= 1
    lam = np.stack([u1 / u0, (u1 + c * u0) / (c * u1 + u0), (-u1 + c * u0) / (c * u1 - u0)], -1)
    h = (rho + q) * c / u0
    z = np.zeros_like(rho)
    one = np.ones_like(rho)
    L = np.stack(
        [np.stack([-c2, z, one], -1), np.stack([z, h, one], -1), np.stack([z, -h, one], -1)],
        -2,
    )
    return EigenSystem(lam, L, c, h)


def eigen_residual(cset: ConstitutiveSet, rho, u1, q, n=DEFAULT_N) -> np.ndarray:
    """max_A |l^A (A0^{-1} A1 - lambda^A I)|, one value per state."""
    A0, A1, _ = quasilinear_matrices(cset, rho, u1, q, n)
    M = np.linalg.solve(A0, A1)
    es = eigensystem(cset, rho, u1, q, n)
    lM = np.einsum("...ai,...ij->...aj", es.left_vectors, M)
    r = lM - es.lambdas[..., :, None] * es.left_vectors
    return np.abs(r).max(axis=(-1, -2))


def necessary_condition_residual(cset: ConstitutiveSet, rho, q, n=DEFAULT_N):
    """zeta / (2 tau0 (rho + q)) + dp/drho.

    Riemann invariants need this to vanish identically in (rho, q), which in
    turn forces dp/drho = 0.
    """
    rho, q = _arrays(rho, q)
    w = rho + q
    if np.any(w == 0):
        raise ZeroDivisionError("rho + q vanished")
    return 0.5 * cset.zeta_over_tau0(rho, n) / w + cset.dp_drho(rho, n)


def _h(cset, rho, u1, q, n):
    c2 = np.maximum(barotropic_c2(cset, rho, q, n), 0.0)
    return (rho + q) * np.sqrt(c2) / np.sqrt(1.0 + u1**2)


def curl_obstruction(cset: ConstitutiveSet, rho, u1, q, n=DEFAULT_N) -> float:
    """max |d h / d q| over the given states, h = (rho + q) c / u0.

    A Riemann invariant along l^2 = (0, h, 1) needs curl(Lambda l^2) = 0,
    whose second and third rows force h to be independent of q.  The
    mirrored vector l^3 gives the same defect under u1 -> -u1.
    """
    rho, u1, q = _arrays(rho, u1, q)
    dq = 1e-5 * (1.0 + np.abs(q))
    dh = (_h(cset, rho, u1, q + dq, n) - _h(cset, rho, u1, q - dq, n)) / (2 * dq)
    return float(np.max(np.abs(dh)))


def random_states(cset: ConstitutiveSet, rng, size, n=DEFAULT_N, rho_range=(0.1, 10.0),
                  u_max=5.0, Pi_scale=0.2, max_tries=50):
    """Random (rho, u1, q) with rho + q > 0 and 0 < c^2 < 1."""
    out = []
    need = size
    for _ in range(max_tries):
        m = 4 * need
        rho = rng.uniform(*rho_range, m)
        u1 = rng.uniform(-u_max, u_max, m)
        q = cset.p(rho, n) + Pi_scale * rho * rng.uniform(-1, 1, m)
        with np.errstate(all="ignore"):
            c2 = cset.dp_drho(rho, n) + cset.zeta_over_tau0(rho, n) / (rho + q)
        ok = (rho + q > 0) & (c2 > 0) & (c2 < 1)
        out.append(np.stack([rho[ok], u1[ok], q[ok]], -1))
        need -= int(ok.sum())
        if need <= 0:
            break
    states = np.concatenate(out)[:size]
    if len(states) < size:
        raise ValueError("could not sample enough states with 0 < c^2 < 1")
    return states[:, 0], states[:, 1], states[:, 2]
