"""Binary container: a JSON header followed by little-endian float64 payload.

Layout::

    b"SOPC" | u32 header length (LE) | header (UTF-8 JSON) | f64 payload

The header carries a ``"tensors"`` table mapping each array name to its
shape and offset (in elements) inside the payload, so one file can hold
a pair of trace channels, a feature matrix, or a full parameter blob.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np

MAGIC = b"SOPC"


def encode(header: Mapping[str, Any], arrays: Mapping[str, np.ndarray]) -> bytes:
    table = {}
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        table[name] = {"shape": list(a.shape), "offset": offset}
        chunks.append(a.tobytes())
        offset += a.size
    full = dict(header)
    full["tensors"] = table
    head = json.dumps(full, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<I", len(head)) + head + b"".join(chunks)


def decode(blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if blob[:4] != MAGIC:
        raise ValueError("not a SOPC container (bad magic)")
    (n,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8 : 8 + n].decode("utf-8"))
    payload = np.frombuffer(blob, dtype="<f8", offset=8 + n)
    arrays = {}
    for name, info in header.pop("tensors").items():
        size = int(np.prod(info["shape"], dtype=np.int64))
        start = info["offset"]
        arrays[name] = payload[start : start + size].reshape(info["shape"]).astype(np.float64)
    return header, arrays


def write(path: str | Path, header: Mapping[str, Any], arrays: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(encode(header, arrays))


def read(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    return decode(Path(path).read_bytes())


def array_digest(arrays: Mapping[str, np.ndarray]) -> str:
    """SHA-256 over names and little-endian bytes, in sorted name order."""
    h = hashlib.sha256()
    for name in sorted(arrays):
        h.update(name.encode())
        h.update(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())
    return h.hexdigest()
