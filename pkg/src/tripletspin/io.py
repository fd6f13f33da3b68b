"""CSV tables and JSON result envelopes."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


class DataFormatError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (str, bool, np.bool_)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header: list[str], rows) -> str:
    """Write rows under a one-line header; floats use their shortest round-trip repr."""
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row width does not match header")
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def columns_to_rows(*cols):
    return zip(*[np.asarray(c).tolist() for c in cols])


def read_csv(path, header: list[str]) -> np.ndarray:
    """Read a numeric table with exactly ``header`` as its first line.

    Raises DataFormatError naming the offending 1-based line number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if [h.strip() for h in first] != header:
            raise DataFormatError(f"{path}: line 1: expected header {','.join(header)}")
        out = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}: line {lineno}: expected {len(header)} columns, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise DataFormatError(f"{path}: line {lineno}: non-numeric value") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataFormatError(f"{path}: line {lineno}: non-finite value")
            out.append(vals)
    if not out:
        raise DataFormatError(f"{path}: no data rows")
    return np.array(out)


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


@dataclass
class ResultEnvelope:
    command: str
    config_hash: str
    payload: dict
    provenance: list[str] = field(default_factory=list)
    version: str = __version__
    # left empty so that repeated runs are byte-identical
    timestamp: str | None = None

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "config_hash": self.config_hash,
            "version": self.version,
            "timestamp": self.timestamp,
            "payload": jsonable(self.payload),
            "provenance": list(self.provenance),
        }
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"

    def write(self, path) -> str:
        text = self.to_json()
        Path(path).write_text(text)
        return text
