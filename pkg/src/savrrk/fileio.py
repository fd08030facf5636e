"""Deterministic file writers shared by the harness and the CLI.

Every writer goes through an atomic rename so partially written files are
never visible, and all numeric formatting is fixed: study CSVs use the
shortest round-trip representation of each double, field snapshots use
``%.17g``.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def fmt(value) -> str:
    """Shortest round-trip decimal form of a double (CSV cell format)."""
    return repr(float(value))


def write_csv(path, header, rows):
    """Write a study CSV: fixed header, round-trip doubles, '' for missing."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if cell is None:
                cells.append("")
            elif isinstance(cell, str):
                cells.append(cell)
            elif isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            else:
                cells.append(fmt(cell))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_field_csv(path, values: np.ndarray):
    """Headerless snapshot: ny rows of nx comma-separated %.17g doubles."""
    values = np.asarray(values, dtype=float)
    lines = [",".join("%.17g" % v for v in row) for row in values]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_field_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_field_pgm(path, values: np.ndarray):
    """8-bit binary PGM with linear min-max scaling.

    The original range is recorded in the comment line so the scaling is
    reversible up to quantization.
    """
    values = np.asarray(values, dtype=float)
    lo = float(values.min())
    hi = float(values.max())
    if hi > lo:
        scaled = np.rint((values - lo) * (255.0 / (hi - lo)))
    else:
        scaled = np.zeros_like(values)
    ny, nx = values.shape
    header = f"P5\n# min={lo:.17g} max={hi:.17g}\n{nx} {ny}\n255\n"
    atomic_write_bytes(path, header.encode("ascii")
                       + scaled.astype(np.uint8).tobytes())
