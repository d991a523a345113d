"""JSON and CSV output. JSON documents carry ``"schema": 1``; CSV files use
RFC-4180 quoting with CRLF line endings."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def to_jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc: dict) -> str:
    body = {"schema": SCHEMA_VERSION, **doc}
    return json.dumps(to_jsonable(body), indent=2, sort_keys=True) + "\n"


def write_json(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows))


def curve_rows(summary):
    return zip(summary.grid, summary.mean_curve, summary.median_curve,
               summary.lower_band, summary.upper_band)


CURVE_HEADER = ("x", "mean", "median", "lo", "hi")
