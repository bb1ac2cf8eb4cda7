"""Generic file utilities for anakit: CSV tables, JSON documents and histograms."""

from __future__ import annotations

import io
import json
import pathlib
from collections.abc import Sequence
from typing import Any

import numpy as np

from anakit import oracle


CSV_FORMAT = "%.17g"
HISTOGRAM_COLUMNS = ("left_edge", "right_edge", "count", "density")


def ensure_directory(path: pathlib.Path) -> pathlib.Path:
    """Create `path` (and parents) if needed and return it."""
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path: pathlib.Path, columns: Sequence[str], data: Any) -> pathlib.Path:
    """Write a header row and one row per entry of `data`.

    Values use the '.' decimal separator and enough digits to round-trip floats.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data.reshape(-1, 1) if len(columns) == 1 else data.reshape(1, -1)
    if data.size and data.shape[1] != len(columns):
        raise ValueError(f"{len(columns)} column names for {data.shape[1]} columns")
    with path.open("w", newline="") as f:
        f.write(",".join(columns) + "\n")
        if data.size:
            np.savetxt(f, data, fmt=CSV_FORMAT, delimiter=",")
    return path


def read_csv(path: pathlib.Path) -> tuple[list[str], np.ndarray]:
    """Read a file written by `write_csv` as (column names, 2-D array)."""
    with path.open() as f:
        header = f.readline().strip()
        body = f.read()
    columns = header.split(",") if header else []
    if not body.strip():
        return columns, np.empty((0, len(columns)))
    return columns, np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)


def read_samples(path: pathlib.Path) -> np.ndarray:
    """Samples from a CSV file: the first column, or rows if there are several."""
    _, data = read_csv(path)
    return data[:, 0] if data.shape[1] == 1 else data


def write_json(path: pathlib.Path, document: dict[str, Any]) -> pathlib.Path:
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: pathlib.Path) -> Any:
    return json.loads(path.read_text())


def write_histogram(path: pathlib.Path, hist: oracle.Histogram) -> pathlib.Path:
    """One row per bin: left edge, right edge, count, density."""
    if hist.normalized:
        density = hist.counts / np.diff(hist.edges)
    else:
        density = hist.density()
    rows = np.column_stack([hist.edges[:-1], hist.edges[1:], hist.counts, density])
    return write_csv(path, HISTOGRAM_COLUMNS, rows)
