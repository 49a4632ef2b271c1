"""Command line entry point.  Exit codes: 0 all verdicts pass, 2 a verdict fails, 1 fault."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .currents import DensityCurrent, flat_distance_codim1, jacobian_ac, jacobian_gl
from .energy import PlanarDisk, energy_gl
from .geometry import ConformalFactor, PeriodicGrid
from .io import read_config, read_snapshot, write_snapshot, write_trace
from .flow import FlowConfig, FlowResult, dissipation_identity_check, run_flow
from .minmax import RunConfig, antipodal_experiment, experiment, run_minmax
from .recovery import gl_vortex_ansatz
from .ymh import decay_check, glue_and_jacobian, solve_vortex_profile, ymh_energy

PASS, FAULT, FAIL = 0, 1, 2


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig.from_mapping(read_config(path, set(RunConfig.KEYS)))


def _verdict_line(name: str, ok: bool, detail: str = "") -> str:
    return f"{name:<28s} {'PASS' if ok else 'FAIL'}  {detail}".rstrip()


def cmd_spectrum(args) -> int:
    ex = experiment(_load_config(args.config))
    b = ex.basis
    print(f"{'k':>4s} {'comp':>5s} {'eigenvalue':>20s}")
    for k in range(min(args.count, len(b.eigenvalues))):
        print(f"{k + 1:>4d} {int(b.component[k]):>5d} {b.eigenvalues[k]:>20.12g}")
    print(f"ell    {b.ell}")
    print(f"lambda {b.lam:.12g}")
    print(f"wbar   {b.wbar:.12g}")
    return PASS


def cmd_flow(args) -> int:
    cfg = _load_config(args.config)
    ex = experiment(cfg)
    u0 = ex.initial(np.array([args.w]) if ex.basis.ell else np.zeros(0))
    res = run_flow(u0, ex.grid, FlowConfig(T=cfg.T, sigma=cfg.sigma, trace_every=cfg.trace_every))
    rep = dissipation_identity_check(res.trace)
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        write_trace(out / "trace.tsv", FlowResult.TRACE_COLUMNS, res.trace)
        write_snapshot(out / "final.bin", res.state.field, res.state.t)
    print(f"steps      {res.state.steps}")
    print(f"E(0)       {res.trace[0][2]:.12g}")
    print(f"E(T)       {res.trace[-1][2]:.12g}")
    print(_verdict_line("dissipation identity", rep.ok, f"relative residual {rep.relative:.3e}"))
    return PASS if rep.ok else FAIL


def cmd_minmax(args) -> int:
    cfg = _load_config(args.config)
    rep = run_minmax(cfg)
    print(f"w*                      {rep.root.w:.12g}")
    print(f"f(w*, T)                {rep.root.f:.12g}")
    print(f"probes                  {len(rep.root.probes)}")
    print(f"H1(M)                   {rep.H1:.12g}")
    print(f"max flat distance       {rep.max_flat:.12g}")
    print(f"max |E - H1(M)|         {rep.max_energy_dev:.12g}")
    print(f"near-critical t         {rep.t_critical:.12g}  residual {rep.residual_critical:.6g}")
    print(f"dissipation residual    {rep.dissipation.relative:.6g}")
    for k, v in rep.verdicts.items():
        print(_verdict_line(k, v))
    return PASS if rep.passed else FAIL


def cmd_flatnorm(args) -> int:
    cfg = _load_config(args.config) if args.config else None
    fa, _ = read_snapshot(args.a)
    fb, _ = read_snapshot(args.b)
    if fa.samples.shape != fb.samples.shape or fa.kind != fb.kind or fa.kind != "AC":
        raise ValueError("flatnorm needs two AC snapshots of the same shape")
    ny, nx = fa.samples.shape
    a, mode = (cfg.a, cfg.mode) if cfg else (args.a_metric, args.mode)
    grid = PeriodicGrid(nx, ny, ConformalFactor(a, mode))
    if args.raw_density:
        A, B = DensityCurrent(grid, fa.samples), DensityCurrent(grid, fb.samples)
    else:
        A, B = jacobian_ac(fa, grid), jacobian_ac(fb, grid)
    print("%.12g" % flat_distance_codim1(A, B))
    return PASS


def cmd_vortex_gl(args) -> int:
    rows = []
    for eps in args.eps:
        disk = PlanarDisk(1.0, args.n)
        u = gl_vortex_ansatz(disk, eps)
        e = energy_gl(u, disk)
        J = jacobian_gl(u, disk)
        rows.append((eps, e.total, e.potential, J.positive_mass()))
    print(f"{'eps':>8s} {'energy':>16s} {'potential':>16s} {'J+':>12s}")
    for r in rows:
        print(f"{r[0]:>8.4g} {r[1]:>16.12g} {r[2]:>16.12g} {r[3]:>12.8g}")
    E = [r[1] for r in rows]
    ok_range = all(1.0 < v < 1.5 for v in E)
    ok_dec = all(x > y for x, y in zip(E, E[1:]))
    print(_verdict_line("energies in (1, 1.5)", ok_range))
    print(_verdict_line("strictly decreasing", ok_dec))
    return PASS if ok_range and ok_dec else FAIL


def cmd_vortex_ymh(args) -> int:
    prof = solve_vortex_profile(args.eps, args.R)
    E = ymh_energy(prof)
    dec = decay_check(prof)
    rho0 = min(args.R, 20 * args.eps)
    glued = glue_and_jacobian(prof, rho0)
    print(f"energy              {E:.12g}")
    print(f"newton residual     {prof.residual:.3e}")
    print(f"decay slope         {dec.slope:.6g}")
    print(f"decay ratio 18/8    {dec.ratio:.6g}")
    print(f"integral of J       {glued.checks['integral_J']:.12g}")
    checks = {
        "unit energy": abs(E - 1) <= 1e-3,
        "decay slope <= -0.5": dec.slope <= -0.5,
        "gauge bound where f >= 1/2": dec.gauge_bound_ok,
        "zero energy outside rho0": glued.checks["outside_density_max"] == 0.0,
        "integral J = 1": abs(glued.checks["integral_J"] - 1) <= 1e-12,
    }
    for k, v in checks.items():
        print(_verdict_line(k, v))
    if args.out:
        write_trace(args.out, ("r", "f", "a"), zip(prof.r, prof.f, prof.a))
    return PASS if all(checks.values()) else FAIL


def cmd_antipodal(args) -> int:
    ok = True
    print(f"{'d0':>6s} {'extracted':>12s} {'critical':>12s} {'energy':>12s}  verdict")
    for d0 in args.d0:
        r = antipodal_experiment(args.n, args.eps, d0, T=args.T)
        status = "collapsed" if r.collapsed else ("PASS" if r.ok else "FAIL")
        crit = "nan" if r.critical_distance is None else f"{r.critical_distance:.6f}"
        en = "nan" if r.critical_energy is None else f"{r.critical_energy:.6f}"
        print(f"{d0:>6.3f} {r.extracted_distance:>12.6f} {crit:>12s} {en:>12s}  {status}")
        ok &= r.ok or r.collapsed
    return PASS if ok else FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="concset", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", help="Jacobi eigenvalues, Morse index, lambda, wbar")
    s.add_argument("--config")
    s.add_argument("--count", type=int, default=8)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("flow", help="flow the recovery data at one w and check the dissipation ledger")
    s.add_argument("--config")
    s.add_argument("--w", type=float, default=0.0)
    s.set_defaults(func=cmd_flow)

    s = sub.add_parser("minmax", help="root search in w and trajectory verification")
    s.add_argument("--config")
    s.set_defaults(func=cmd_minmax)

    s = sub.add_parser("flatnorm", help="flat distance between two AC snapshots")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--config")
    s.add_argument("--raw-density", action="store_true", help="snapshot values are densities, not fields")
    s.add_argument("--metric-a", dest="a_metric", type=float, default=0.5)
    s.add_argument("--metric-mode", dest="mode", type=int, default=1)
    s.set_defaults(func=cmd_flatnorm)

    s = sub.add_parser("vortex-gl", help="planar GL vortex ansatz energies")
    s.add_argument("--eps", type=float, nargs="+", default=[0.05, 0.02, 0.01])
    s.add_argument("--n", type=int, default=1000)
    s.set_defaults(func=cmd_vortex_gl)

    s = sub.add_parser("vortex-ymh", help="radial self-dual vortex")
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--R", type=float, default=1.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_vortex_ymh)

    s = sub.add_parser("antipodal", help="1-D two-transition experiment")
    s.add_argument("--n", type=int, default=1024)
    s.add_argument("--eps", type=float, default=0.03)
    s.add_argument("--d0", type=float, nargs="+", default=[0.4, 0.45])
    s.add_argument("--T", type=float, default=0.1)
    s.set_defaults(func=cmd_antipodal)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except Exception as e:  # any fault maps to exit code 1
        print(f"error: {e}", file=sys.stderr)
        return FAULT


if __name__ == "__main__":
    sys.exit(main())
