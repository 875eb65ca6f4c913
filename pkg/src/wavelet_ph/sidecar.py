"""Binary container for cached arrays.

Layout: 8-byte magic ``WPHCACHE``, little-endian uint32 format version,
uint32 header length, a UTF-8 JSON header listing metadata and array
descriptors, then every array's data in row-major little-endian order
(float64 or int64).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError

MAGIC = b"WPHCACHE"
VERSION = 1
_DTYPES = {"f8": np.dtype("<f8"), "i8": np.dtype("<i8")}


def save(path, arrays: dict, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    descriptors = []
    payload = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        code = "i8" if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool else "f8"
        data = np.array(arr, dtype=_DTYPES[code], order="C")
        descriptors.append({"name": name, "dtype": code, "shape": list(data.shape)})
        payload.append(data.tobytes(order="C"))
    header = json.dumps({"meta": meta or {}, "arrays": descriptors}).encode()
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for chunk in payload:
            fh.write(chunk)
    tmp.replace(path)
    return path


def load(path):
    """Return ``(arrays, meta)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise DataFormatError(f"{path}: not a sidecar file")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported sidecar version {version}")
    header = json.loads(raw[16 : 16 + hlen])
    pos = 16 + hlen
    arrays = {}
    for desc in header["arrays"]:
        dtype = _DTYPES[desc["dtype"]]
        count = int(np.prod(desc["shape"], dtype=np.int64))
        nbytes = count * dtype.itemsize
        arrays[desc["name"]] = np.frombuffer(raw, dtype=dtype, count=count, offset=pos).reshape(tuple(desc["shape"])).copy()
        pos += nbytes
    return arrays, header["meta"]
