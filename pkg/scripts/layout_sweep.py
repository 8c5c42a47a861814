#!/usr/bin/env python3
"""Compare particle-table layouts (row-major vs column-major) on the N-body
miniapp and chart the per-kernel medians."""

import argparse
from pathlib import Path

from miniapps.bench import run_benchmark, summary_path_for
from miniapps.nbody import NBodyConfig
from miniapps.portability import Layout
from plotview.cli import main as plotview_main


def run(out_dir: Path, particles: int, steps: int, ranks: int, reps: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    for name, layout in (("row", Layout.ROW_MAJOR), ("col", Layout.COL_MAJOR)):
        csv_path = out_dir / f"nbody_{name}.csv"
        cfg = NBodyConfig(n_particles=particles, steps=steps, layout=layout)
        bench = run_benchmark(cfg, ranks=ranks, reps=reps, csv_path=csv_path)
        summaries.append(f"{name}={summary_path_for(csv_path)}")
        for row in bench.summary:
            print(f"{name:>3}  {row.category:<12} median {row.median:.6f}s")
    args = []
    for s in summaries:
        args += ["--summary", s]
    plotview_main(args + ["--group-by", "layout",
                          "--out", str(out_dir / "nbody_layouts.png")])
    print(f"chart: {out_dir / 'nbody_layouts.png'}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("bench_out"))
    parser.add_argument("--particles", type=int, default=512)
    parser.add_argument("--steps", type=int, default=50)
    parser.add_argument("--ranks", type=int, default=4)
    parser.add_argument("--reps", type=int, default=10)
    ns = parser.parse_args()
    run(ns.out, ns.particles, ns.steps, ns.ranks, ns.reps)
