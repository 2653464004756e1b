"""Command-line entry point: ``fracpde <subcommand> [options]``.

Exit status: 0 on success, 2 for configuration or usage errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__, kernels
from .control import PolyKernel, kernel_residuals
from .fdm import SimulationError
from .fractional import SampledFunction
from .green import GreenAccuracyError, GreenDomainError, PhysicalParams, green_eval, stability_bound
from .scenario import (
    ConfigError,
    Scenario,
    ScenarioConfig,
    default_config,
    load_config,
    parse_profile,
    run_scenario,
    write_outputs,
    write_plot_script,
)

log = logging.getLogger("fracpde")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=default, help="scenario INI file")
    p.add_argument("--out", type=Path, default=default, help="output directory")
    p.add_argument("--seed", type=int, default=default, help="noise seed (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)
    return p


def _scenario_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else default_config()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "sigma", None) is not None:
        changes["sigma"] = args.sigma
    if getattr(args, "controller", None):
        changes["controller"] = args.controller
    return cfg.replace(**changes) if changes else cfg


def _run(args, mode: str) -> int:
    cfg = _scenario_config(args)
    if mode == "observe" and cfg.observer == "none":
        raise ConfigError("observe needs [observer] type = adaptive")
    rep = run_scenario(Scenario.from_config(cfg), mode)
    out = args.out or Path("runs") / mode
    paths = write_outputs(rep, out)
    print(f"mode: {mode}   backend: {kernels.BACKEND}   runtime: {rep.runtime_s:.2f} s")
    for key in sorted(rep.metrics):
        print(f"  {key:20s} {rep.metrics[key]:.6g}")
    print(f"outputs in {Path(paths['report']).parent}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    return _run(args, "open-loop")


def cmd_track(args) -> int:
    return _run(args, "track")


def cmd_observe(args) -> int:
    return _run(args, "observe")


def cmd_closed_loop(args) -> int:
    return _run(args, "closed-loop")


def _params_from(args) -> PhysicalParams:
    if args.config:
        cfg = load_config(args.config)
        k0 = cfg.k if cfg.k0 is None else cfg.k0
        return PhysicalParams(k0=k0, mu=cfg.mu, C=cfg.C, rho=cfg.rho, L=cfg.L)
    return PhysicalParams(k0=args.k, mu=args.mu, C=args.C, rho=args.rho)


def cmd_green(args) -> int:
    params = _params_from(args)
    xs = np.asarray(args.x, dtype=np.float64)
    vals = np.atleast_1d(green_eval(xs, args.t, args.alpha, params))
    for xv, gv in zip(xs, vals):
        print(f"G({xv:.6g}, {args.t:.6g}) = {gv:.15g}")
    if args.profile:
        lo, hi, n = args.profile
        grid = np.linspace(float(lo), float(hi), int(n))
        prof = np.atleast_1d(green_eval(grid, args.t, args.alpha, params))
        out = args.out or Path("runs") / "green"
        out.mkdir(parents=True, exist_ok=True)
        path = out / "green_profile.csv"
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("x\tG\n")
            for xv, gv in zip(grid, prof):
                fh.write(f"{xv:.17g}\t{gv:.17g}\n")
        print(f"profile written to {path}")
    return EXIT_OK


def cmd_bound(args) -> int:
    params = _params_from(args)
    q = SampledFunction.from_callable(parse_profile(args.q, params.L), 0.0, params.L, args.nx)
    val = stability_bound(q, args.r, args.umax, args.alpha, params)
    print(f"{val:.12g}")
    return EXIT_OK


def cmd_verify_kernel(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    x = rng.uniform(0.0, 1.0, args.samples)
    y = x * rng.uniform(0.0, 1.0, args.samples)
    res = kernel_residuals(PolyKernel(args.m), x, y, args.alpha)
    worst = 0.0
    for key in ("pde", "rl_trace", "caputo_trace", "diagonal", "base"):
        v = float(np.max(res[key]))
        worst = max(worst, v)
        print(f"{key:14s} {v:.3e}")
    print(f"kernel nonzero on y = 0: {res['base_nonzero']}")
    print(f"max residual {worst:.3e}")
    return EXIT_OK


def cmd_plots(args) -> int:
    dirs = args.dirs or ([args.out] if args.out else [])
    if not dirs:
        raise ConfigError("plots needs at least one run directory")
    for d in dirs:
        d = Path(d)
        if not (d / "tracking.csv").exists() and not (d / "field.csv").exists():
            raise ConfigError(f"{d} does not look like a run directory")
        print(write_plot_script(d))
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = _scenario_config(args)
    text = cfg.to_text()
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
        print(f"configuration written to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracpde", description=__doc__.splitlines()[0], parents=[_global_flags(False)])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    flags = _global_flags(True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, parents=[flags])
        p.set_defaults(func=func)
        return p

    for name, func, text in (
        ("simulate", cmd_simulate, "open-loop run (u = 0) with the configured disturbances"),
        ("track", cmd_track, "controller on the true state (noise perturbs the fed samples)"),
        ("observe", cmd_observe, "adaptive observer alongside the plant"),
        ("closed-loop", cmd_closed_loop, "controller fed by the observer estimate"),
    ):
        p = add(name, func, text)
        p.add_argument("--sigma", type=float, default=None, help="noise standard deviation")
        if name in ("track", "closed-loop", "observe"):
            p.add_argument("--controller", choices=("volterra", "convolution", "none"), default=None)

    def physical(p):
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--k", type=float, default=1.0, help="permeability (lower bound k0)")
        p.add_argument("--mu", type=float, default=1.0)
        p.add_argument("--C", type=float, default=1.0)
        p.add_argument("--rho", type=float, default=1.0)

    p = add("green", cmd_green, "evaluate the whole-line Green function")
    physical(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x", type=float, nargs="+", default=[0.0])
    p.add_argument("--profile", nargs=3, metavar=("XLO", "XHI", "N"), help="also write a profile CSV")

    p = add("bound", cmd_bound, "long-time sup-norm bound for a separable source")
    physical(p)
    p.add_argument("--q", default="zero", help="spatial profile of the source, e.g. 'sine 1 1'")
    p.add_argument("--r", type=float, default=1.0, help="bound on |T(t)|")
    p.add_argument("--umax", type=float, default=0.0, help="bound on the boundary input")
    p.add_argument("--nx", type=int, default=201)

    p = add("verify-kernel", cmd_verify_kernel, "residuals of the kernel equation at random points")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=10000)

    p = add("plots", cmd_plots, "write plot scripts into existing run directories")
    p.add_argument("dirs", nargs="*", type=Path)

    add("config", cmd_config, "print (or write with --out) the effective configuration")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, GreenDomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, GreenAccuracyError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
