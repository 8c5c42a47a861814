"""Benchmark orchestration: repetitions, per-kernel records, medians, CSV.

One raw record is emitted per (category, repetition, rank).  A summary row
per category aggregates repetitions after taking the maximum over ranks
within each repetition (critical-path convention) and reports the median
(mean of the two central values for even counts), minimum and maximum.
Initialization is excluded from every record.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path

from .grid import VorticityConfig, run_vorticity
from .nbody import NBodyConfig, run_nbody
from .portability import make_backend
from .timing import KernelTimers
from .transport import spawn_ranks

NBODY_CATEGORIES = ("force", "reduction", "other_ops")
VORTICITY_CATEGORIES = ("jacobi_kernel", "halo_psi", "other_ops")


@dataclass(frozen=True)
class TimingRecord:
    app: str
    category: str
    rep: int
    rank: int
    seconds: float


@dataclass(frozen=True)
class CategorySummary:
    app: str
    category: str
    median: float
    min: float
    max: float


def categories_for(config) -> tuple[str, ...]:
    if isinstance(config, NBodyConfig):
        if config.compute_energy:
            return NBODY_CATEGORIES
        return tuple(c for c in NBODY_CATEGORIES if c != "reduction")
    if isinstance(config, VorticityConfig):
        return VORTICITY_CATEGORIES
    raise TypeError(f"unknown config type {type(config).__name__}")


def summarize(records: list[TimingRecord]) -> list[CategorySummary]:
    """Per-category stats over repetitions of the max-over-ranks totals."""
    per_rep: dict[tuple[str, str], dict[int, float]] = {}
    order: list[tuple[str, str]] = []
    for rec in records:
        key = (rec.app, rec.category)
        if key not in per_rep:
            per_rep[key] = {}
            order.append(key)
        reps = per_rep[key]
        reps[rec.rep] = max(reps.get(rec.rep, 0.0), rec.seconds)
    out = []
    for key in order:
        values = [per_rep[key][rep] for rep in sorted(per_rep[key])]
        out.append(CategorySummary(key[0], key[1], statistics.median(values),
                                   min(values), max(values)))
    return out


def write_raw_csv(path, records: list[TimingRecord]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["app", "category", "rep", "rank", "seconds"])
        for rec in records:
            writer.writerow([rec.app, rec.category, rec.rep, rec.rank, repr(rec.seconds)])
    return path


def read_raw_csv(path) -> list[TimingRecord]:
    with open(path, newline="") as fh:
        return [TimingRecord(row["app"], row["category"], int(row["rep"]),
                             int(row["rank"]), float(row["seconds"]))
                for row in csv.DictReader(fh)]


def summary_path_for(raw_path) -> Path:
    raw_path = Path(raw_path)
    stem = raw_path.name[:-4] if raw_path.name.endswith(".csv") else raw_path.name
    return raw_path.with_name(stem + ".summary.csv")


def write_summary_csv(path, rows: list[CategorySummary]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["app", "category", "median", "min", "max"])
        for row in rows:
            writer.writerow([row.app, row.category, repr(row.median),
                             repr(row.min), repr(row.max)])
    return path


def read_summary_csv(path) -> list[CategorySummary]:
    with open(path, newline="") as fh:
        return [CategorySummary(row["app"], row["category"], float(row["median"]),
                                float(row["min"]), float(row["max"]))
                for row in csv.DictReader(fh)]


@dataclass
class BenchResult:
    app: str
    records: list[TimingRecord]
    summary: list[CategorySummary]
    rep_results: list[list]  # per rep: per-rank miniapp results


def run_benchmark(config, *, ranks: int = 1, backend_kind: str = "sequential",
                  workers: int = 4, reps: int = 1, csv_path=None, vtk_dir=None,
                  timer_factory=None) -> BenchResult:
    """Run reps repetitions of one miniapp; collect records plus a summary.

    Only the simulation loop is timed; VTK output (final repetition only)
    lands in other_ops.  Any rank failure propagates.
    """
    if reps < 1:
        raise ValueError("repetition count must be >= 1")
    if isinstance(config, NBodyConfig):
        app, kind, runner = "nbody", "ring", run_nbody
    elif isinstance(config, VorticityConfig):
        app, kind, runner = "vorticity", "grid", run_vorticity
    else:
        raise TypeError(f"unknown config type {type(config).__name__}")
    cats = categories_for(config)

    records: list[TimingRecord] = []
    rep_results: list[list] = []
    for rep in range(reps):
        rep_vtk = vtk_dir if (vtk_dir is not None and rep == reps - 1) else None

        def program(comm):
            backend = make_backend(backend_kind, workers)
            if timer_factory is not None:
                timers = timer_factory(rep, comm.rank)
            else:
                timers = KernelTimers(cats)
            result = runner(config, comm, backend, timers, vtk_dir=rep_vtk)
            return timers.totals, result

        per_rank = spawn_ranks(ranks, kind, program)
        for rank, (totals, _) in enumerate(per_rank):
            for cat in cats:
                records.append(TimingRecord(app, cat, rep, rank, totals.get(cat, 0.0)))
        rep_results.append([result for _, result in per_rank])

    summary = summarize(records)
    if csv_path is not None:
        write_raw_csv(csv_path, records)
        write_summary_csv(summary_path_for(csv_path), summary)
    return BenchResult(app, records, summary, rep_results)
