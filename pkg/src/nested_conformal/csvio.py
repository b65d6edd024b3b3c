"""Atomic, deterministic CSV output."""

from __future__ import annotations

import contextlib
import csv
import numbers
import os
import tempfile
from pathlib import Path


def fmt(x) -> str:
    """Shortest round-trip text for a float; integers stay integers."""
    if isinstance(x, str):
        return x
    if isinstance(x, numbers.Integral):
        return str(int(x))
    return repr(float(x))


@contextlib.contextmanager
def atomic_csv(path: str | os.PathLike, header: list[str]):
    """Yield a ``csv.writer``; the file appears at ``path`` only on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            yield writer
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_rows(path, header: list[str], rows) -> None:
    with atomic_csv(path, header) as writer:
        for row in rows:
            writer.writerow([fmt(x) for x in row])
