"""Per-rank legacy-VTK (ASCII, version 3.0) file output.

Floats are written with 17 significant digits so a re-parse recovers the
arrays exactly.  Structured points follow the legacy ordering with x
varying fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class VtkDataset:
    """Geometry plus named point-data arrays for one legacy-VTK file."""

    kind: str  # "point_cloud" | "structured_points"
    geometry: dict
    scalars: list[tuple[str, np.ndarray]]
    vectors: list[tuple[str, np.ndarray]]

    def __post_init__(self):
        names = [n for n, _ in self.scalars] + [n for n, _ in self.vectors]
        if len(set(names)) != len(names):
            raise ValueError("point-data array names must be unique")
        n = self.point_count
        for name, arr in self.scalars:
            if np.asarray(arr).reshape(-1).shape[0] != n:
                raise ValueError(f"scalar array {name!r} length != point count {n}")
        for name, arr in self.vectors:
            if np.asarray(arr).reshape(-1, 3).shape[0] != n:
                raise ValueError(f"vector array {name!r} length != point count {n}")

    @property
    def point_count(self) -> int:
        if self.kind == "point_cloud":
            return np.asarray(self.geometry["points"]).reshape(-1, 3).shape[0]
        nx, ny = self.geometry["dims"]
        return nx * ny

    @classmethod
    def point_cloud(cls, points, scalars=(), vectors=()) -> "VtkDataset":
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return cls("point_cloud", {"points": pts}, list(scalars), list(vectors))

    @classmethod
    def structured_points(cls, dims, origin, spacing, scalars=(), vectors=()) -> "VtkDataset":
        geometry = {"dims": (int(dims[0]), int(dims[1])),
                    "origin": (float(origin[0]), float(origin[1])),
                    "spacing": (float(spacing[0]), float(spacing[1]))}
        return cls("structured_points", geometry, list(scalars), list(vectors))


def write_vtk(dataset: VtkDataset, app: str, rank: int, step: int, out_dir) -> Path:
    """Write one rank's dataset to <dir>/<app>_rank<r>_step<s>.vtk."""
    out_dir = Path(out_dir)
    path = out_dir / f"{app}_rank{rank}_step{step}.vtk"
    lines = ["# vtk DataFile Version 3.0",
             f"{app} rank {rank} step {step}",
             "ASCII"]
    if dataset.kind == "point_cloud":
        pts = np.asarray(dataset.geometry["points"]).reshape(-1, 3)
        n = pts.shape[0]
        lines.append("DATASET POLYDATA")
        lines.append(f"POINTS {n} double")
        lines.extend(" ".join(_fmt(c) for c in p) for p in pts)
        lines.append(f"VERTICES {n} {2 * n}")
        lines.extend(f"1 {i}" for i in range(n))
    else:
        nx, ny = dataset.geometry["dims"]
        ox, oy = dataset.geometry["origin"]
        sx, sy = dataset.geometry["spacing"]
        n = nx * ny
        lines.append("DATASET STRUCTURED_POINTS")
        lines.append(f"DIMENSIONS {nx} {ny} 1")
        lines.append(f"ORIGIN {_fmt(ox)} {_fmt(oy)} 0")
        lines.append(f"SPACING {_fmt(sx)} {_fmt(sy)} 1")
    lines.append(f"POINT_DATA {n}")
    for name, arr in dataset.scalars:
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(x) for x in np.asarray(arr).reshape(-1))
    for name, arr in dataset.vectors:
        lines.append(f"VECTORS {name} double")
        lines.extend(" ".join(_fmt(c) for c in row)
                     for row in np.asarray(arr).reshape(-1, 3))
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"failed to write VTK file {path}: {exc}") from exc
    return path
