"""Evolve the certified shell at several resolutions and report breakdown
times, leakage, energy drift and observed orders of the virial residuals.

    python3 scripts/refinement_study.py [N ...]     (default 2000 4000 8000)
"""
import math
import sys
import time

from misblowup import constitutive as C
from misblowup.certifier import ShellData, find_sigma0
from misblowup.solver import Grid1D, RunOptions, Scheme, VirialConstants, pi_bound_for, shell_snapshot, simulate
from misblowup.state import ConstantState

Ns = [int(a) for a in sys.argv[1:]] or [2000, 4000, 8000]
bg = ConstantState(1.0, 0.5)
cset = C.ideal_gas_set(gamma=4 / 3, zeta=C.n_exp(), tau0=C.constant(1.0))
template = ShellData(1.0, 0.07, 1.0, bg, smooth_w=0.0343)
res = find_sigma0(template, cset)
cert = res.certificate
data = template.with_sigma(res.sigma0)
L = data.R0 + cert.c * cert.T_upper + 0.1
consts = VirialConstants(data.R0, cert.c, cert.b)
print(f"sigma0 = {res.sigma0:.6g}  c = {cert.c:.6f}  T_upper = {cert.T_upper:.6f}  L = {L:.5f}")

runs = {}
print(f"{'N':>6} {'steps':>6} {'t*':>10} {'cause':>18} {'r*':>9} {'leak':>9} {'drift':>9} {'Q ok':>5} {'s':>6}")
for N in Ns:
    grid = Grid1D("radial", N, L)
    t0 = time.perf_counter()
    # rows at the times of the coarsest run
    opts = RunOptions(t_max=cert.T_upper, scheme=Scheme(cfl=0.4, eps_d=0.1), output_every=max(1, N // Ns[0]))
    r = simulate(shell_snapshot(grid, data), grid, cset, bg, opts, consts=consts, pi_bound=pi_bound_for(cset, 0.0))
    runs[N] = r
    b = r.breakdown
    print(f"{N:>6} {r.steps:>6} {b.time:>10.6f} {str(b.cause):>18} {b.position:>9.5f} {r.max_leak:>9.2e} "
          f"{r.energy_drift:>9.2e} {str(r.q_bounds_ok):>5} {time.perf_counter() - t0:>6.1f}")

tabs = [{round(row.t, 10): row for row in runs[N].rows} for N in Ns]
common = sorted(set.intersection(*(set(t) for t in tabs)))
for name in ("Idot_minus_Q", "virial_residual"):
    keep = [t for t in common if all(math.isfinite(getattr(tb[t], name)) for tb in tabs)]
    errs = [max(abs(getattr(tb[t], name)) for t in keep) for tb in tabs]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    print(f"{name}: max over {len(keep)} common rows {['%.3e' % e for e in errs]}, orders {['%.2f' % o for o in orders]}")
