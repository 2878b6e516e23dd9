"""CSV serialization for trajectory logs and sweep summaries.

Files follow RFC 4180: CRLF line endings, a mandatory header row, and fields
quoted only when they need it (the stdlib ``csv`` module handles that).
Floats are printed with ``%.17g`` so every finite double survives a
write/read round trip bit-for-bit, which is what makes "byte-identical output
across reruns" a meaningful promise rather than a tolerance game.

A trajectory file ends with a sentinel row whose first field is ``status``
and whose second is the final run status (``converged`` / ``completed`` /
``diverged`` / ``error``); remaining fields are empty padding so every row in
the file has the same width.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

from ..records import TrajectoryLog

__all__ = [
    "FLOAT_FMT",
    "format_float",
    "write_log_csv",
    "read_log_csv",
    "write_rows_csv",
]

FLOAT_FMT = "%.17g"

STATUS_SENTINEL = "status"


def format_float(x: float) -> str:
    return FLOAT_FMT % float(x)


def _status_row(status: str, width: int) -> list[str]:
    row = [STATUS_SENTINEL, status]
    if width > len(row):
        row += [""] * (width - len(row))
    return row


def write_log_csv(path: str | Path, log: TrajectoryLog) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\r\n")
        writer.writerow(log.columns)
        for row in log.rows():
            writer.writerow([format_float(x) for x in row])
        writer.writerow(_status_row(log.status, len(log.columns)))


def read_log_csv(path: str | Path) -> TrajectoryLog:
    """Inverse of :func:`write_log_csv` (metadata is not persisted)."""
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a CSV header") from None
        log = TrajectoryLog(header)
        status = None
        for row in reader:
            if not row:
                continue
            if row[0] == STATUS_SENTINEL:
                status = row[1]
                break
            log.append([float(x) for x in row])
        if status is None:
            raise ValueError(f"{path}: missing final status row")
        log.status = status
    return log


def write_rows_csv(
    path: str | Path, header: Sequence[str], rows: Iterable[Sequence[object]]
) -> None:
    """Write a plain table (no status sentinel); floats get ``%.17g``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\r\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(
                [format_float(x) if isinstance(x, float) else str(x) for x in row]
            )
