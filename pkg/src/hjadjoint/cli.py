"""Command-line interface.

Exit codes: 0 success, 1 a checked property failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .adjoint import (
    DiscreteMeasure,
    compensated_energy,
    energy_flux_integral,
    h_derivative_estimate,
    propagate_adjoint,
    representation_residual,
)
from .grid import GridFunction, PeriodicGrid, ShiftParam, verify_identities
from .harness import (
    ADJOINT_COLUMNS,
    TOY_COLUMNS,
    TRAJECTORY_COLUMNS,
    DegenerateFit,
    ExperimentConfig,
    RunManifest,
    adjoint_rows,
    build_flux,
    config_from_mapping,
    convergence_study,
    fit_rate,
    load_config,
    trajectory_rows,
    write_rows,
    write_svg,
)
from .initial_data import named
from .solver import SolverConfig, evolve_gradient, evolve_second, monitor_bounds, solve
from .toy import ToyProblem, toy_rate_check

MONITOR_TOL = 1e-8
IDENTITY_TOL = 1e-12
MEASURE_TOL = 1e-12
REPRESENTATION_TOL = 1e-10


class UsageError(Exception):
    pass


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", help="key = value file or JSON manifest")
    g.add_argument("--out", help="output directory (default: runs)")
    g.add_argument("--n", type=int, help="lattice nodes")
    g.add_argument("--m", type=int, help="shift in lattice steps (h = m/n)")
    g.add_argument("--T", type=float, help="final time")
    g.add_argument("--cfl", type=float, help="fraction of the monotone step bound")
    g.add_argument("--flux", help="upwind | crandall_lions | split | smoothed[:eps]")
    g.add_argument("--hamiltonian", help="quadratic | power:<a>")
    g.add_argument("--u0", help="cos | sin | bump | constant[:c]")
    g.add_argument("--gamma", help="auto or a positive number")
    g.add_argument("--integrator", choices=("euler", "rk4"))
    g.add_argument("--svg", action="store_true", help="write a log-log error plot")
    g.add_argument("--seed", type=int, default=0, help="seed for random test data")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="hjadjoint", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    p = sub.add_parser("identities", parents=[common], help="shift-calculus identities on random data")
    p.add_argument("--trials", type=int, default=100)
    p = sub.add_parser("toy", parents=[common], help="rate table for the stationary linear model")
    p.add_argument("--h-list", help="comma-separated negative h values, e.g. --h-list=-1/16,-1/32")
    sub.add_parser("solve", parents=[common], help="single run with a priori bound monitors")
    p = sub.add_parser("adjoint", parents=[common], help="adjoint measure with representation and energy checks")
    p.add_argument("--x0", type=float, default=None, help="terminal Dirac location")
    p.add_argument("--terminal", choices=("dirac", "uniform"), default="dirac")
    p.add_argument("--trials", type=int, default=20)
    p = sub.add_parser("converge", parents=[common], help="convergence table against the exact solution")
    p.add_argument("--h-list", help="n:m pairs, e.g. 16:1,32:1,64:1")
    p.add_argument("--oracle", choices=("hopf_lax", "fine_reference"))
    p = sub.add_parser("hderiv", parents=[common], help="bounds on the derivative of u^h in h")
    p.add_argument("--m-list", default="8,16,32")
    return parser


def _experiment_config(args) -> ExperimentConfig:
    base = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {
        "out": args.out,
        "T": args.T,
        "cfl": args.cfl,
        "flux": args.flux,
        "hamiltonian": args.hamiltonian,
        "u0": args.u0,
        "gamma": args.gamma,
        "integrator": args.integrator,
    }
    if getattr(args, "oracle", None):
        overrides["oracle"] = args.oracle
    if getattr(args, "h_list", None) and args.command == "converge":
        overrides["h_list"] = args.h_list
    elif args.command == "converge" and args.n is not None:
        m = args.m or 1
        overrides["h_list"] = ",".join(f"{args.n >> k}:{m}" for k in range(4, -1, -1) if (args.n >> k) > m)
    if getattr(args, "x0", None) is not None:
        overrides["x0"] = args.x0
    return config_from_mapping(overrides, base)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _report(ok: bool, label: str, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    return ok


def cmd_identities(args, cfg) -> int:
    t0 = time.perf_counter()
    n = args.n or 64
    m = args.m or 1
    rng = np.random.default_rng(args.seed)
    grid = PeriodicGrid(n)
    s = ShiftParam(m, grid)
    worst_abs, worst_scaled = {}, {}
    for _ in range(args.trials):
        f = GridFunction(grid, rng.standard_normal(n))
        g = GridFunction(grid, rng.standard_normal(n))
        rep = verify_identities(f, g, s)
        for k in rep.residuals:
            worst_abs[k] = max(worst_abs.get(k, 0.0), rep.residuals[k])
            worst_scaled[k] = max(worst_scaled.get(k, 0.0), rep.scaled[k])
    out = _out_dir(cfg)
    write_rows(out / "identities.csv", ("identity", "abs_residual", "scaled_residual"),
               [(k, worst_abs[k], worst_scaled[k]) for k in worst_abs])
    RunManifest(
        "identities", {"n": n, "m": m, "trials": args.trials, "seed": args.seed},
        {"abs_residual": worst_abs, "scaled_residual": worst_scaled},
        {"total": time.perf_counter() - t0},
    ).to_json(out / "manifest.json")
    ok = True
    for k in worst_abs:
        ok &= _report(worst_scaled[k] <= IDENTITY_TOL, k, f"abs={worst_abs[k]:.3e} scaled={worst_scaled[k]:.3e}")
    return 0 if ok else 1


def _parse_fraction(text: str) -> float:
    num, _, den = text.strip().partition("/")
    return float(num) / float(den) if den else float(num)


def cmd_toy(args, cfg) -> int:
    t0 = time.perf_counter()
    n = args.n or 128
    hs = [_parse_fraction(t) for t in args.h_list.split(",")] if args.h_list else [-1 / 16, -1 / 32, -1 / 64, -1 / 128]
    res = toy_rate_check(ToyProblem.sine(n), hs)
    out = _out_dir(cfg)
    path = write_rows(out / "toy.csv", TOY_COLUMNS, list(res.rows()))
    print(",".join(TOY_COLUMNS))
    for row in res.rows():
        print(",".join(repr(v) for v in row))
    RunManifest(
        "toy", {"n": n, "h_list": hs, "f": "sin(2 pi x)"},
        {"exact": res.exact, "slope": res.slope, "ratio_spread": None if res.exact else res.ratio_spread},
        {"total": time.perf_counter() - t0}, oracle="quadrature",
    ).to_json(out / "manifest.json")
    if res.exact:
        print("exact")
        return 0
    print(f"slope={res.slope:.6f} ratio_spread={res.ratio_spread:.4f} -> {path}")
    ok = _report(res.slope >= 0.9, "toy slope", f"{res.slope:.4f} >= 0.9")
    ok &= _report(res.ratio_spread <= 4.0, "err/|h| spread", f"{res.ratio_spread:.4f} <= 4")
    return 0 if ok else 1


def _single_run(args, cfg):
    u0 = named(cfg.u0)
    F = build_flux(cfg, u0)
    sc = SolverConfig(n=args.n or 64, m=args.m or 1, T=cfg.T, cfl=cfg.cfl, integrator=cfg.integrator)
    traj = evolve_gradient(solve(u0, F, sc))
    if F.has_hessian:
        traj = evolve_second(traj)
    return u0, F, sc, traj


def cmd_solve(args, cfg) -> int:
    t0 = time.perf_counter()
    u0, F, sc, traj = _single_run(args, cfg)
    mon = monitor_bounds(traj)
    out = _out_dir(cfg)
    write_rows(out / "trajectory.csv", TRAJECTORY_COLUMNS, trajectory_rows(traj))
    maxima = mon.maxima()
    RunManifest(
        "solve",
        {**cfg.to_dict(), "n": sc.n, "m": sc.m},
        {"dt": traj.dt, "nsteps": traj.nsteps, "flux": F.label, "monitor_maxima": maxima},
        {"total": time.perf_counter() - t0},
    ).to_json(out / "manifest.json")
    print(f"flux={F.label} n={sc.n} m={sc.m} dt={traj.dt:.6g} steps={traj.nsteps}")
    ok = True
    for k, v in maxima.items():
        if cfg.integrator == "euler":
            ok &= _report(v <= MONITOR_TOL, k, f"max excess {v:.3e}")
        else:
            print(f"[INFO] {k}: max excess {v:.3e} (bounds are asserted for Euler only)")
    return 0 if ok else 1


def cmd_adjoint(args, cfg) -> int:
    if cfg.integrator != "euler":
        raise UsageError("the adjoint is defined for --integrator euler only")
    t0 = time.perf_counter()
    u0, F, sc, traj = _single_run(args, cfg)
    grid = traj.grid
    term = DiscreteMeasure.uniform(grid) if args.terminal == "uniform" else DiscreteMeasure.dirac(grid, cfg.x0)
    adj = propagate_adjoint(traj, term)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.trials):
        c = rng.standard_normal(4)
        k = rng.integers(1, 4, size=2)

        def theta(x, t, c=c, k=k):
            return c[0] * np.sin(2 * np.pi * k[0] * x + c[1]) * np.cos(c[2] * t) + c[3] * np.cos(2 * np.pi * k[1] * x) * t

        worst = max(worst, representation_residual(adj, theta))
    e410 = energy_flux_integral(traj, adj)
    e413 = compensated_energy(traj) if F.kind == "crandall_lions" else float("nan")
    out = _out_dir(cfg)
    write_rows(out / "adjoint.csv", ADJOINT_COLUMNS, adjoint_rows(adj))
    mass = float(np.max(adj.mass_errors))
    mn = float(np.min(adj.min_weights))
    RunManifest(
        "adjoint",
        {**cfg.to_dict(), "n": sc.n, "m": sc.m, "terminal": args.terminal},
        {"max_mass_error": mass, "min_weight": mn, "max_representation_residual": worst,
         "energy410": e410, "energy413": e413, "flux": F.label},
        {"total": time.perf_counter() - t0},
    ).to_json(out / "manifest.json")
    print(f"energy410={e410:.6g} energy413={e413:.6g}")
    ok = _report(mass <= MEASURE_TOL, "mass", f"max |mass - 1| = {mass:.3e}")
    ok &= _report(mn >= -1e-14, "sign", f"min weight = {mn:.3e}")
    ok &= _report(worst <= REPRESENTATION_TOL, "representation", f"max residual = {worst:.3e}")
    return 0 if ok else 1


def cmd_converge(args, cfg) -> int:
    t0 = time.perf_counter()
    out = _out_dir(cfg)

    def progress(row, extra):
        print(f"  n={row['n']:5d} h={row['h']:.6g} err={row['sup_error']:.6e} ({extra['wall_time']:.2f}s)", flush=True)

    table, diag = convergence_study(cfg, progress=progress)
    path = table.to_csv(out / "convergence.csv")
    results = {"label": table.label, "exact": table.exact, "diagnostics": diag}
    ok = True
    if table.exact:
        print("exact: all errors <= 1e-10")
    else:
        try:
            fit = fit_rate(table)
        except DegenerateFit as exc:
            raise UsageError(str(exc)) from exc
        results.update(slope=fit.slope, intercept=fit.intercept, C=fit.C)
        print(f"slope={fit.slope:.6f} C={fit.C:.6f} -> {path}")
        ok &= _report(0.45 <= fit.slope <= 1.1, "slope", f"{fit.slope:.4f} in [0.45, 1.1]")
        ok &= _report(bool(np.all(np.diff(table.errors) < 0)), "monotone errors", "strictly decreasing")
    if args.svg:
        try:
            svg = write_svg({table.label: (table.hs, table.errors)}, out / "convergence.svg")
        except ImportError as exc:
            raise UsageError("--svg needs matplotlib (pip install hjadjoint[plot])") from exc
        print(f"plot -> {svg}")
    RunManifest(
        "converge", cfg.to_dict(), results,
        {"total": time.perf_counter() - t0, **{str(d["n"]): d["wall_time"] for d in diag["rows"]}},
        oracle=cfg.oracle,
    ).to_json(out / "manifest.json")
    return 0 if ok else 1


def cmd_hderiv(args, cfg) -> int:
    n = args.n or 2048
    T = args.T if args.T is not None else 0.5
    ms = [int(v) for v in args.m_list.split(",")] if args.m is None else [args.m]
    u0 = named(cfg.u0)
    F = build_flux(cfg, u0)
    reps = {m: h_derivative_estimate(u0, F, n, m, T, cfg.cfl) for m in sorted(ms)}
    out = _out_dir(cfg)
    rows = [(m, t, hi, lo) for m, r in reps.items() for t, hi, lo in zip(r.times, r.max_x, r.min_x)]
    write_rows(out / "hderiv.csv", ("m", "t", "max_uh", "min_uh"), rows)
    ref = reps[max(reps)]
    c_low = ref.lower_constant()
    ok = True
    for m, r in reps.items():
        ok &= _report(r.upper_excess(1e-3) <= 0, f"m={m} upper", f"max_x u_h - C_up t <= 1e-3 (C_up={r.c_up:.4g})")
        ok &= _report(r.lower_constant() <= 3.0 * c_low, f"m={m} lower",
                      f"sqrt(h)|min u_h|/(1+t) = {r.lower_constant():.4g} <= 3 x {c_low:.4g}")
    RunManifest(
        "hderiv", {**cfg.to_dict(), "n": n, "m_list": sorted(ms), "T": T},
        {"c_up": ref.c_up, "c_low": c_low, "lower_constants": {m: r.lower_constant() for m, r in reps.items()}},
    ).to_json(out / "manifest.json")
    return 0 if ok else 1


COMMANDS = {
    "identities": cmd_identities,
    "toy": cmd_toy,
    "solve": cmd_solve,
    "adjoint": cmd_adjoint,
    "converge": cmd_converge,
    "hderiv": cmd_hderiv,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _experiment_config(args)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ValueError, KeyError, OSError) as exc:
        print(f"hjadjoint {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
