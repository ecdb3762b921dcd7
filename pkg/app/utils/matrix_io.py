"""File helpers for matrices, vectors, record streams and keyed reports."""

import csv
import sys
from collections.abc import Iterable, Iterator, Mapping, Sequence
from contextlib import contextmanager
from pathlib import Path
from typing import IO

import numpy as np

from app.exceptions import InputFormatError

STDIO = "-"


def read_matrix(path: Path) -> np.ndarray:
    """
    Read a headerless comma-separated matrix.

    Args:
        path: CSV file, one row per line

    Returns:
        2-D float64 array (a single line reads as one row)
    """
    try:
        arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise InputFormatError(f"{path}: {e}") from e
    if arr.size == 0:
        raise InputFormatError(f"{path}: no numeric data")
    return arr


def read_vector(path: Path) -> np.ndarray:
    """Read a vector stored as one row or one column."""
    arr = read_matrix(path)
    if 1 not in arr.shape:
        raise InputFormatError(f"{path}: expected a single row or column, got shape {arr.shape}")
    return arr.reshape(-1)


def list_batch_files(directory: Path) -> list[Path]:
    """CSV files of a batch directory in name order."""
    files = sorted(p for p in directory.glob("*.csv") if p.is_file())
    if not files:
        raise InputFormatError(f"{directory}: no .csv files")
    return files


def read_batch(path: Path) -> tuple[list[str], list[np.ndarray]]:
    """
    Read one matrix file, or every ``*.csv`` in a directory as a batch.

    Returns:
        Item names (file stems) and the matrices in the same order
    """
    if path.is_dir():
        files = list_batch_files(path)
        return [p.stem for p in files], [read_matrix(p) for p in files]
    return [path.stem], [read_matrix(path)]


def read_lines(path: Path) -> Iterator[str]:
    """Non-blank lines of a text file (``-`` reads standard input)."""
    if str(path) == STDIO:
        yield from (line for line in sys.stdin if line.strip())
        return
    with open(path, encoding="utf-8") as f:
        yield from (line for line in f if line.strip())


@contextmanager
def open_output(path: Path | str | None) -> Iterator[IO[str]]:
    """Open ``path`` for writing; ``None`` or ``-`` yields standard output."""
    if path is None or str(path) == STDIO:
        yield sys.stdout
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as f:
        yield f


def write_matrix(m: np.ndarray, path: Path | str | None = None) -> None:
    """Write a matrix as headerless CSV with round-trip precision."""
    with open_output(path) as out:
        np.savetxt(out, np.atleast_2d(m), delimiter=",", fmt="%.17g")


def write_rows(header: Sequence[str] | None, rows: Iterable[Sequence[object]], path: Path | str | None = None) -> None:
    """Write CSV rows, with an optional header line."""
    with open_output(path) as out:
        writer = csv.writer(out, lineterminator="\n")
        if header:
            writer.writerow(header)
        writer.writerows(rows)


def format_value(value: object) -> str:
    """Render a report value; floats keep full precision."""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_keyed(values: Mapping[str, object], path: Path | str | None = None) -> None:
    """
    Write ``name=value`` lines.

    Examples:
        >>> write_keyed({"qd_score": 0.125})
        qd_score=0.125
    """
    with open_output(path) as out:
        for key, value in values.items():
            out.write(f"{key}={format_value(value)}\n")
