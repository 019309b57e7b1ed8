"""
Command-line entry point.

Exit codes: 0 success (a detected breakdown is a successful simulation),
1 domain failure (assumptions violated, certificate invalid, no sigma0
found, flow-line check failed), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import certifier, files, flowline, riemann, solver
from .config import ConfigError, parse_config
from .constitutive import QuadratureDivergence, abar_bound, validate_assumptions
from .certifier import default_sample
from .state import slack

OK, DOMAIN, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if args.out else Path(cfg.get("output", "directory"))


def _abar(cset):
    try:
        return float(abar_bound(cset))
    except QuadratureDivergence:
        return math.nan


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_validate_eos(args, cfg) -> int:
    cset = cfg.constitutive_set()
    bg = cfg.background()
    report = validate_assumptions(cset, default_sample(bg))
    print(report.summary())
    abar = _abar(cset)
    print(f"Abar = {abar!r}" if math.isfinite(abar) else "Abar: integral diverges (A4 fails)")
    try:
        print(f"background sound speed c = {bg.sound_speed(cset)!r}")
    except ValueError as exc:
        print(f"background: {exc}")
        return DOMAIN
    return OK if report.passed else DOMAIN


def _print_certificate(cert):
    for line in cert.dumps().splitlines():
        print("  " + line)


def cmd_certify(args, cfg) -> int:
    cset = cfg.constitutive_set()
    data = cfg.shell_data()
    if args.sigma is not None:
        data = data.with_sigma(args.sigma)
    cert = certifier.certify(data, cset, cfg.certify_options())
    path = files.write_certificate(_out_dir(args, cfg) / "certificate.txt", cert)
    print(f"certificate {'VALID' if cert.valid else 'INVALID'} for sigma = {cert.sigma!r}; written to {path}")
    _print_certificate(cert)
    return OK if cert.valid else DOMAIN


def cmd_find_sigma0(args, cfg) -> int:
    cset = cfg.constitutive_set()
    c = cfg.sections["certify"]
    res = certifier.find_sigma0(cfg.shell_data(), cset, (c["sigma_min"], c["sigma_max"]),
                                c["rel_tol"], cfg.certify_options())
    for s, ok in res.sweep:
        print(f"  sigma = {s!r}: {'valid' if ok else 'invalid'}")
    if not res.found:
        print("no certified sigma in range")
        for reason in res.diagnostics:
            print(f"  {reason}")
        return DOMAIN
    path = files.write_certificate(_out_dir(args, cfg) / "certificate.txt", res.certificate)
    print(f"sigma0 = {res.sigma0!r}; T_upper = {res.certificate.T_upper!r}; written to {path}")
    return OK


def _forcing(f):
    if f["forcing"] == "constant":
        return flowline.constant_forcing(f["offset"])
    if f["forcing"] == "sine":
        return flowline.sine_forcing(f["amp"], f["omega"], f["offset"])
    return flowline.random_forcing(np.random.default_rng(f["seed"]), amp=f["amp"])


def cmd_flowline(args, cfg) -> int:
    cset = cfg.constitutive_set()
    bg = cfg.background()
    f = cfg.sections["flowline"]
    rho0 = bg.rho_bar if math.isnan(f["rho0"]) else f["rho0"]
    n0 = bg.n_bar if math.isnan(f["n0"]) else f["n0"]
    try:
        path = flowline.integrate_flowline((rho0, n0, f["Pi0"]), cset, _forcing(f), f["tau_max"])
    except flowline.StiffFailure as exc:
        print(f"integration failed at tau = {exc.last_tau!r}")
        return DOMAIN
    abar = _abar(cset)
    bound = flowline.pi_bound(f["Pi0"], abar) if math.isfinite(abar) else math.nan
    tau = np.linspace(0.0, path.tau[-1], f["samples"])
    rho, n, Pi = path.sol(tau)
    e = rho + cset.p(rho, n) + Pi
    F = [flowline.F_value(cset, (a, b, c), bg.n_bar, f["eps"]) for a, b, c in zip(rho, n, Pi)]
    rows = zip(tau, rho, n, Pi, e, np.full_like(tau, bound), F)
    out = files.write_csv(_out_dir(args, cfg) / "flowline.csv", files.FLOWLINE_COLUMNS, rows)
    wec = flowline.wec_propagation_check(path)
    print(f"flow line to tau = {float(path.tau[-1])!r} ({path.status}); written to {out}")
    print(f"min e = {wec.min_e!r}; max |Pi| = {path.max_abs_Pi!r}; bound = {bound!r}")
    ok = wec.ok and (math.isnan(bound) or path.max_abs_Pi <= bound + 1e-8)
    if not ok:
        print("flow-line check FAILED")
    return OK if ok else DOMAIN


def _grid(cfg, t_max, N=None):
    g = cfg.sections["grid"]
    d = cfg.sections["data"]
    c = cfg.background().sound_speed(cfg.constitutive_set())
    need = d["R0"] + c * t_max
    L = g["L"]
    if math.isnan(L):
        L = need + 0.1 * d["R0"]
    elif L <= need:
        raise UsageError(f"[grid] L = {L!r} must exceed R0 + c t_max = {need!r}")
    return solver.Grid1D(g["mode"], N or g["N"], L), c


def cmd_simulate(args, cfg) -> int:
    cset = cfg.constitutive_set()
    bg = cfg.background()
    data = cfg.shell_data()
    g = cfg.sections["grid"]
    th = cfg.sections["thresholds"]
    t_max = args.tmax if args.tmax is not None else g["t_max"]
    if not t_max > 0:
        raise UsageError("--tmax must be positive")
    try:
        grid, c = _grid(cfg, t_max, args.N)
    except ValueError as exc:
        print(f"background: {exc}")
        return DOMAIN

    snap = solver.shell_snapshot(grid, data)
    with np.errstate(all="ignore"):
        if np.min(slack(cset, snap.rho, snap.n, snap.Pi)) <= 0:
            print("initial data are not physical states")
            return DOMAIN

    abar = _abar(cset)
    pi_bound = data.max_abs_Pi() + 3 * abar if math.isfinite(abar) else None
    b = certifier.constants_bk(cset, data, abar)[0] if math.isfinite(abar) else math.nan
    consts = solver.VirialConstants(data.R0, c, b)
    opts = solver.RunOptions(
        t_max=t_max,
        scheme=solver.Scheme(cfl=g["cfl"], eps_d=g["eps_d"]),
        thresholds=solver.Thresholds(th["grad_factor"], th["delta"], th["leak_tol"], th["n_floor"]),
        output_every=cfg.get("output", "interval"),
        snapshot_every=cfg.get("output", "snapshots"),
    )
    res = solver.simulate(snap, grid, cset, bg, opts, consts=consts, pi_bound=pi_bound)

    out = _out_dir(args, cfg)
    files.write_csv(out / "diagnostics.csv", solver.DIAGNOSTIC_COLUMNS, (r.values() for r in res.rows))
    xname = "r" if grid.radial else "x"
    for idx, s in enumerate(res.snapshots):
        cs2 = solver._cs2_cells(cset, s)
        e = s.rho + cset.p(s.rho, s.n) + s.Pi
        files.write_csv(out / f"snap_{idx}.csv", (xname,) + files.SNAPSHOT_COLUMNS,
                        zip(grid.x, s.rho, s.n, s.Pi, s.u, cs2, e))
    rep = res.breakdown
    lines = [
        f"triggered = {'true' if rep.triggered else 'false'}",
        f"time = {rep.time!r}",
        f"cause = {rep.cause or 'none'}",
        f"cell = {rep.cell if rep.cell is not None else -1}",
        f"position = {rep.position!r}",
        f"value = {rep.value!r}",
        f"pi_bound_enabled = {'true' if rep.pi_bound_enabled else 'false'}",
        f"steps = {res.steps}",
        f"dt = {res.dt!r}",
        f"energy_drift = {res.energy_drift!r}",
        f"max_leak = {res.max_leak!r}",
        f"q_bounds_ok = {res.q_bounds_ok if res.q_bounds_ok is None else str(res.q_bounds_ok).lower()}",
    ] + [f"note = {n}" for n in rep.notes]
    (out / "breakdown.txt").write_text("\n".join(lines) + "\n")
    print(rep.summary())
    print(f"{len(res.rows)} diagnostics rows, {len(res.snapshots)} snapshots written to {out}")
    return OK


def cmd_riemann_check(args, cfg) -> int:
    cset = cfg.constitutive_set()
    r = cfg.sections["riemann"]
    k = r["points"]
    n = r["n"]
    rho = np.geomspace(r["rho_min"], r["rho_max"], k)
    u1 = np.linspace(-r["u_max"], r["u_max"], k)
    frac = np.linspace(-r["Pi_frac"], r["Pi_frac"], k)
    R, U, Fr = (a.ravel() for a in np.meshgrid(rho, u1, frac, indexing="ij"))
    Q = cset.p(R, n) + Fr * R
    with np.errstate(all="ignore"):
        c2 = cset.dp_drho(R, n) + cset.zeta_over_tau0(R, n) / (R + Q)
    ok = (R + Q > 0) & (c2 > 0) & (c2 < 1)
    if not ok.any():
        print("no state of the grid has rho + q > 0 and 0 < c^2 < 1")
        return DOMAIN
    R, U, Q = R[ok], U[ok], Q[ok]
    es = riemann.eigensystem(cset, R, U, Q, n)
    res = riemann.eigen_residual(cset, R, U, Q, n)
    nec = riemann.necessary_condition_residual(cset, R, Q, n)
    print(f"{'rho':>10} {'u1':>10} {'q':>10} {'lambda1':>10} {'lambda2':>10} {'lambda3':>10} "
          f"{'eig_res':>10} {'necessary':>10} {'curl':>10}")
    for i in range(len(R)):
        curl = riemann.curl_obstruction(cset, R[i], U[i], Q[i], n)
        l1, l2, l3 = es.lambdas[i]
        print(f"{R[i]:10.4g} {U[i]:10.4g} {Q[i]:10.4g} {l1:10.4g} {l2:10.4g} {l3:10.4g} "
              f"{res[i]:10.2e} {nec[i]:10.4g} {curl:10.4g}")
    print(f"max eigen-residual {res.max():.3e}; min necessary-condition residual {nec.min():.6g}; "
          f"max curl defect {riemann.curl_obstruction(cset, R, U, Q, n):.6g}")
    return OK


def verify_certificate(path, cfg=None) -> int:
    try:
        cert = files.read_certificate(path)
    except (OSError, ValueError) as exc:
        print(f"cannot read certificate: {exc}", file=sys.stderr)
        return USAGE
    again = cert.recheck()
    differ = files.certificates_agree(cert, again)
    if cfg is not None:
        data = replace(cfg.shell_data(), sigma=cert.sigma)
        fresh = certifier.certify(data, cfg.constitutive_set(), cfg.certify_options())
        fresh.sigma0 = cert.sigma0
        differ += [f"recomputed {d}" for d in files.certificates_agree(cert, fresh)]
    if differ:
        print("certificate does not re-check: " + ", ".join(differ))
        return DOMAIN
    print(f"certificate re-checks; {'VALID' if again.valid else 'INVALID'}")
    return OK if again.valid else DOMAIN


COMMANDS = {
    "validate-eos": (cmd_validate_eos, "check the structural assumptions on the constitutive set"),
    "certify": (cmd_certify, "evaluate the blowup certificate for the configured shell"),
    "find-sigma0": (cmd_find_sigma0, "search the smallest certified amplitude sigma"),
    "flowline": (cmd_flowline, "integrate one flow line and write flowline.csv"),
    "simulate": (cmd_simulate, "evolve the shell data and write diagnostics.csv"),
    "riemann-check": (cmd_riemann_check, "tabulate eigenstructure and Riemann-invariant obstruction"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="misblowup", description=__doc__.strip().splitlines()[0])
    p.add_argument("--verify-certificate", metavar="FILE",
                   help="re-check a certificate file (with --config, also recompute it)")
    p.add_argument("--config", help="configuration file (for --verify-certificate)")
    sub = p.add_subparsers(dest="command")
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="configuration file")
        sp.add_argument("--out", help="output directory (overrides [output] directory)")
        if name == "certify":
            sp.add_argument("--sigma", type=float, help="override [data] sigma")
        if name == "simulate":
            sp.add_argument("--tmax", type=float, help="override [grid] t_max")
            sp.add_argument("--N", type=int, help="override [grid] N")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command is None:
            if args.verify_certificate is None:
                parser.print_usage(sys.stderr)
                return USAGE
            cfg = parse_config(args.config) if args.config else None
            return verify_certificate(args.verify_certificate, cfg)
        cfg = parse_config(args.config)
        return COMMANDS[args.command][0](args, cfg)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"{args.config}: {err}", file=sys.stderr)
        return USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
