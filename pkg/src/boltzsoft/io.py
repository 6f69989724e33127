"""CSV and structured-text writers.  Every CSV starts with a header row."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .trajectory import Trajectory


def fmt(x) -> str:
    """Stable text form of a number: 12 significant digits, nan/inf spelled out."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12e}"
    return str(x)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


TRAJECTORY_COLUMNS = ("cell", "v_index", "vx", "vy", "vz", "F", "f")


def write_trajectory(directory: str | Path, tr: Trajectory, prefix: str = "trajectory") -> list[Path]:
    """One CSV per stored time: cell index, v index, v components, F, f."""
    directory = Path(directory)
    V = tr.grid.nodes
    paths = []
    for k in range(tr.n_times):
        f = tr.values[k]
        F = tr.grid.mu + tr.grid.sqrt_mu * f
        rows = ((c, j, V[j, 0], V[j, 1], V[j, 2], F[c, j], f[c, j])
                for c in range(f.shape[0]) for j in range(f.shape[1]))
        paths.append(write_csv(directory / f"{prefix}_{k:04d}.csv", TRAJECTORY_COLUMNS, rows))
    return paths


def write_text(path: str | Path, lines: Iterable[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{ln}\n" for ln in lines))
    return path
