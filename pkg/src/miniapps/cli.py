"""Command-line entry point for the miniapp benchmark harness.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import run_benchmark, summary_path_for
from .errors import ConfigError
from .grid import VorticityConfig
from .nbody import LJParams, NBodyConfig, SimBox
from .portability import Layout
from .transport import TransportError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miniapps",
        description="Benchmark harness for the N-body and vorticity miniapps")
    sub = parser.add_subparsers(dest="app", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--ranks", type=int, default=1, help="rank count (default 1)")
    common.add_argument("--backend", choices=["sequential", "parallel"],
                        default="sequential")
    common.add_argument("--workers", type=int, default=None,
                        help="worker threads for --backend parallel (default 4)")
    common.add_argument("--reps", type=int, default=1, help="repetitions (default 1)")
    common.add_argument("--seed", type=int, default=12345)
    common.add_argument("--csv", type=Path, default=None,
                        help="raw-records CSV path; summary goes to *.summary.csv")
    common.add_argument("--vtk-dir", type=Path, default=None,
                        help="write per-rank VTK files for the final step here")
    common.add_argument("--layout", choices=["row", "col"], default="row")

    nb = sub.add_parser("nbody", parents=[common],
                        help="all-pairs Lennard-Jones N-body simulation")
    nb.add_argument("--particles", type=int, default=1000)
    nb.add_argument("--steps", type=int, default=100)
    nb.add_argument("--dt", type=float, default=1e-3)
    nb.add_argument("--epsilon", type=float, default=1.0)
    nb.add_argument("--sigma", type=float, default=1.0)
    nb.add_argument("--box", type=float, default=None,
                    help="cubic box side length (default: sized from the particle count)")
    nb.add_argument("--no-reduction", action="store_true",
                    help="skip the total-energy reduction")

    vo = sub.add_parser("vorticity", parents=[common],
                        help="2-D vorticity / stream-function solver")
    vo.add_argument("--nx", type=int, default=100)
    vo.add_argument("--ny", type=int, default=100)
    vo.add_argument("--steps", type=int, default=10)
    vo.add_argument("--tol", type=float, default=1e-4)
    vo.add_argument("--nu", type=float, default=0.01)
    vo.add_argument("--scenario", choices=["cavity", "taylor-green"], default="cavity")
    return parser


def parse_cli(argv=None):
    """Parse and cross-validate arguments; usage errors exit with status 2."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.ranks < 1:
        parser.error("--ranks must be >= 1")
    if ns.reps < 1:
        parser.error("--reps must be >= 1")
    if ns.workers is not None and ns.backend != "parallel":
        parser.error("--workers requires --backend parallel")
    if ns.workers is not None and ns.workers < 1:
        parser.error("--workers must be >= 1")
    layout = Layout.ROW_MAJOR if ns.layout == "row" else Layout.COL_MAJOR
    try:
        if ns.app == "nbody":
            if ns.particles % ns.ranks != 0:
                parser.error(f"--particles {ns.particles} not divisible by "
                             f"--ranks {ns.ranks}")
            config = NBodyConfig(
                n_particles=ns.particles, steps=ns.steps, dt=ns.dt,
                params=LJParams(epsilon=ns.epsilon, sigma=ns.sigma),
                box=SimBox(ns.box) if ns.box is not None else None,
                compute_energy=not ns.no_reduction, seed=ns.seed, layout=layout)
        else:
            config = VorticityConfig(nx=ns.nx, ny=ns.ny, steps=ns.steps,
                                     tol=ns.tol, nu=ns.nu, scenario=ns.scenario)
    except ConfigError as exc:
        parser.error(str(exc))
    ns.config = config
    return ns


def main(argv=None) -> int:
    ns = parse_cli(argv)
    try:
        if ns.vtk_dir is not None:
            ns.vtk_dir.mkdir(parents=True, exist_ok=True)
        bench = run_benchmark(ns.config, ranks=ns.ranks, backend_kind=ns.backend,
                              workers=ns.workers or 4, reps=ns.reps,
                              csv_path=ns.csv, vtk_dir=ns.vtk_dir)
    except (ConfigError, TransportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{'app':<10} {'category':<14} {'median':>12} {'min':>12} {'max':>12}")
    for row in bench.summary:
        print(f"{row.app:<10} {row.category:<14} {row.median:>12.6f} "
              f"{row.min:>12.6f} {row.max:>12.6f}")
    if ns.csv is not None:
        print(f"raw records: {ns.csv}")
        print(f"summary:     {summary_path_for(ns.csv)}")
    return 0


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
