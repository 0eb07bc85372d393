"""File formats: HCAV binary arrays, CSV tables and canonical JSON.

HCAV layout (all little-endian)::

    b"HCAV" | version u32 | rank u32 | dims u64 * rank | float64 data, row-major
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import ValidationError

MAGIC = b"HCAV"
VERSION = 1


def write_array(path, array) -> None:
    a = np.asarray(array, dtype="<f8", order="C")
    header = MAGIC + struct.pack("<II", VERSION, a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(a.tobytes(order="C"))


def read_array(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValidationError(f"{path}: not an HCAV array (bad magic)")
    version, rank = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported HCAV version {version}")
    dims = struct.unpack_from(f"<{rank}Q", data, 12)
    offset = 12 + 8 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    if len(data) - offset != 8 * count:
        raise ValidationError(f"{path}: payload size does not match dims {dims}")
    return np.frombuffer(data, dtype="<f8", offset=offset, count=count).reshape(dims).copy()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    return obj


def write_json(path, obj) -> None:
    """Sorted keys, fixed indentation, non-finite numbers as null."""
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
