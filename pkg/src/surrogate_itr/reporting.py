"""Deterministic serialization and atomic file output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

# keys outside the hash: output plumbing, and the seed (reported next to the hash)
HASH_EXCLUDED = frozenset({"out", "threads", "format", "config", "seed"})


def plain(obj):
    """Recursively convert to JSON-safe builtins; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # + 0.0 folds negative zero into zero so products like -1 * 0 print as 0.0
        return v + 0.0 if math.isfinite(v) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _cell(v) -> str:
    v = plain(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ";".join(_cell(x) for x in v)
    return str(v)


def csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_hash(config: dict) -> str:
    kept = {k: v for k, v in config.items() if k not in HASH_EXCLUDED}
    blob = json.dumps(plain(kept), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


__all__ = ["plain", "dumps_json", "csv_text", "atomic_write", "config_hash", "HASH_EXCLUDED"]
