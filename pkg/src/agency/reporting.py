"""Deterministic report emission.

One JSON document per run plus optional CSV tables.  Floats are printed
with 17 significant digits so re-runs with the same inputs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import os
from typing import Mapping, Sequence

from .reports import jsonable

REPORT_SCHEMA_VERSION = 1


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    if isinstance(value, int):
        return str(value)
    return str(value)


def csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([fmt(cell) for cell in row])
    return buf.getvalue()


def report_text(payload: Mapping) -> str:
    doc = {"schema_version": REPORT_SCHEMA_VERSION}
    doc.update(payload)
    return json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_text(path: str, text: str) -> str:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path
