"""Writers for the on-disk formats (JSONL event streams, CSV series, JSON summaries).

Floats in CSV and JSONL are written with 17 significant digits so every
value round-trips exactly.
"""
from __future__ import annotations

import csv
import json
import math
import os

import numpy as np


def fmt(v):
    """Scalar to text: integers plain, floats as ``%.17g``."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return "null"
        return format(v, ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    if v is None:
        return "null"
    if isinstance(v, str):
        return json.dumps(v)
    return fmt(v)


def dumps(obj) -> str:
    """Compact JSON with 17-digit floats (non-finite floats become null)."""
    return _json_value(obj)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def write_jsonl(path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(dumps(row))
            fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
