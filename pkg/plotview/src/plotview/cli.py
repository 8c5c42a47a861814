"""Render stacked-bar execution-time charts from benchmark summary CSVs.

Consumes only the CSV contract of the benchmark harness: summary files with
columns app,category,median,min,max (one configuration per file) and raw
files with app,category,rep,rank,seconds.  Never runs the simulators.

Exit codes: 0 success, 1 bad or inconsistent data, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from pathlib import Path

SUMMARY_COLUMNS = ("app", "category", "median", "min", "max")
RAW_COLUMNS = ("app", "category", "rep", "rank", "seconds")


class DataError(RuntimeError):
    """Input CSV is missing, empty, malformed, or internally inconsistent."""


def _read_rows(path, required):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in required if c not in header]
            if missing:
                raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no data rows")
    return rows


def load_summary(path) -> dict[str, float]:
    """Ordered {category: median seconds} for one configuration file."""
    rows = _read_rows(path, SUMMARY_COLUMNS)
    apps = {row["app"] for row in rows}
    out: dict[str, float] = {}
    for row in rows:
        key = row["category"] if len(apps) == 1 else f"{row['app']}:{row['category']}"
        if key in out:
            raise DataError(f"{path}: duplicate category {key!r}")
        try:
            out[key] = float(row["median"])
        except ValueError as exc:
            raise DataError(f"{path}: bad median {row['median']!r}") from exc
    return out


def medians_from_raw(path) -> dict[str, float]:
    """Recompute summary medians from raw records: per-rep max over ranks,
    then the median over reps (the harness convention)."""
    rows = _read_rows(path, RAW_COLUMNS)
    apps = {row["app"] for row in rows}
    per_rep: dict[str, dict[int, float]] = {}
    for row in rows:
        key = (row["category"] if len(apps) == 1
               else f"{row['app']}:{row['category']}")
        try:
            rep, seconds = int(row["rep"]), float(row["seconds"])
        except ValueError as exc:
            raise DataError(f"{path}: bad raw row {row}") from exc
        reps = per_rep.setdefault(key, {})
        reps[rep] = max(reps.get(rep, 0.0), seconds)
    return {key: statistics.median(reps[r] for r in sorted(reps))
            for key, reps in per_rep.items()}


def parse_inputs(specs) -> dict[str, dict[str, float]]:
    """--summary values are PATH or LABEL=PATH; label defaults to the stem."""
    out: dict[str, dict[str, float]] = {}
    for spec in specs:
        label, _, path = spec.rpartition("=")
        if not label:
            path = spec
            label = Path(path).name
            for suffix in (".summary.csv", ".csv"):
                if label.endswith(suffix):
                    label = label[:-len(suffix)]
                    break
        if label in out:
            raise DataError(f"duplicate configuration label {label!r}")
        out[label] = load_summary(path)
    return out


def category_order(configs: dict[str, dict[str, float]]) -> list[str]:
    order: list[str] = []
    for medians in configs.values():
        for cat in medians:
            if cat not in order:
                order.append(cat)
    return order


def render_stacked_bars(configs: dict[str, dict[str, float]], out_path,
                        group_by: str) -> dict[str, dict[str, float]]:
    """Draw one stacked bar per configuration; return the plotted heights."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    categories = category_order(configs)
    labels = list(configs)
    fig, ax = plt.subplots(figsize=(1.8 + 1.2 * len(labels), 4.0), dpi=100)
    bottoms = [0.0] * len(labels)
    colors = plt.get_cmap("tab10")
    for ci, cat in enumerate(categories):
        heights = [configs[label].get(cat, 0.0) for label in labels]
        ax.bar(labels, heights, bottom=bottoms, label=cat,
               color=colors(ci % 10), width=0.6)
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    ax.set_ylabel("seconds")
    ax.set_xlabel(group_by)
    ax.set_title("median execution time by kernel category")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Software": "plotview"})
    plt.close(fig)
    return {label: dict(medians) for label, medians in configs.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotview",
        description="Stacked-bar execution-time charts from benchmark summary CSVs")
    parser.add_argument("--summary", action="append", required=True,
                        metavar="[LABEL=]PATH",
                        help="summary CSV for one configuration (repeatable)")
    parser.add_argument("--raw", action="append", default=[], metavar="PATH",
                        help="raw CSV to cross-check the matching summary against")
    parser.add_argument("--out", required=True, type=Path, help="output PNG path")
    parser.add_argument("--group-by", choices=["backend", "layout", "ranks"],
                        default="backend", help="axis label for the configurations")
    parser.add_argument("--self-report", action="store_true",
                        help="print the plotted segment heights as JSON")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configs = parse_inputs(args.summary)
        for raw_path in args.raw:
            recomputed = medians_from_raw(raw_path)
            matches = [label for label, medians in configs.items()
                       if all(abs(medians.get(c, -1.0) - v) == 0.0
                              for c, v in recomputed.items())
                       and set(medians) == set(recomputed)]
            if not matches:
                raise DataError(
                    f"{raw_path}: recomputed medians match no loaded summary")
        report = render_stacked_bars(configs, args.out, args.group_by)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.self_report:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
