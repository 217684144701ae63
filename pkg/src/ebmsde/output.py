"""Deterministic file output: RFC-4180 CSV, stable-key JSON, atomic writes.

Floats are written with 17 significant digits ('.' decimal separator), so a
run is byte-reproducible given (config, seed).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from typing import Iterable, Sequence

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _atomic_write(path: str, writer) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    def writer(fh):
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])

    _atomic_write(path, writer)
    return path


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path: str, obj: dict) -> str:
    def writer(fh):
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")

    _atomic_write(path, writer)
    return path


def canonical_hash(doc: dict) -> str:
    """sha256 of the canonical (sorted-key, compact) JSON encoding."""
    blob = json.dumps(_jsonable(doc), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def emit_outputs(summary: dict, tables: dict, out_dir: str) -> list[str]:
    """Write one summary.json plus one CSV per table; returns the paths."""
    paths = []
    for name, (header, rows) in tables.items():
        paths.append(write_csv(os.path.join(out_dir, f"{name}.csv"), header, rows))
    paths.append(write_json(os.path.join(out_dir, "summary.json"), summary))
    return paths


def write_increments_csv(path: str, times: np.ndarray, increments: np.ndarray) -> str:
    """Export an increment matrix for cross-validation against other tools."""
    header = ["step", "t_left"] + [f"dB_{j + 1}" for j in range(increments.shape[1])]
    rows = [
        [k, times[k], *increments[k]] for k in range(increments.shape[0])
    ]
    return write_csv(path, header, rows)
