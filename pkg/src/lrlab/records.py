"""Propagation records and their CSV form."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import astuple, dataclass, fields

import numpy as np

CSV_HEADER = ("experiment", "n_sites", "site_a", "site_b", "distance", "t",
              "empirical_norm", "envelope_value", "params_digest")


@dataclass(frozen=True)
class PropagationRecord:
    experiment: str
    n_sites: int
    site_a: int
    site_b: int
    distance: int
    t: float
    empirical_norm: float
    envelope_value: float
    params_digest: str = ""


def format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        # repr is the shortest string that round-trips exactly
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def format_csv(records) -> str:
    rows = sorted(records, key=lambda r: (r.distance, r.t))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in rows:
        writer.writerow([format_value(v) for v in astuple(rec)])
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_csv(records, path) -> None:
    """Write records sorted by (distance, t) in the shared CSV schema."""
    atomic_write_text(path, format_csv(records))


def read_csv(path) -> list[PropagationRecord]:
    types = {f.name: f.type for f in fields(PropagationRecord)}
    casts = {"int": int, "float": float, "str": str}
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        for row in reader:
            out.append(PropagationRecord(*(casts[types[name]](v) for name, v in zip(header, row))))
    return out
