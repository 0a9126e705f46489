"""CSV tables with fixed 17-significant-digit formatting and atomic file writes."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

FLOAT_FORMAT = "%.16e"


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` so that ``path`` is either absent/old or complete."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_table(columns: Mapping[str, Sequence[float]]) -> str:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names]) if names else np.empty((0, 0))
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    for row in data:
        buf.write(",".join(FLOAT_FORMAT % x for x in row) + "\n")
    return buf.getvalue()


def write_table(path: str | os.PathLike, columns: Mapping[str, Sequence[float]]) -> None:
    atomic_write_text(path, format_table(columns))


def read_table(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i].copy() for i, name in enumerate(header)}
