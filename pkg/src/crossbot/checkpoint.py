"""Versioned checkpoint container: one JSON header line plus raw array bytes.

The format carries no timestamps, so identical contents produce identical
bytes (the determinism contract for repeated seeded runs).  Arrays are
stored C-contiguous in the order listed by the header.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import CheckpointError

FORMAT_NAME = "crossbot-checkpoint"
FORMAT_VERSION = 1


def save_arrays(path, arrays: dict, meta: dict) -> None:
    """Write named arrays plus a JSON-serializable metadata block."""
    names = sorted(arrays)
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "meta": meta,
        "arrays": [
            {
                "name": name,
                "dtype": str(arrays[name].dtype),
                "shape": list(arrays[name].shape),
            }
            for name in names
        ],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8"))
        fh.write(b"\n")
        for name in names:
            fh.write(np.ascontiguousarray(arrays[name]).tobytes())


def load_arrays(path):
    """Read back (arrays, meta); raises CheckpointError on malformed files."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: unreadable checkpoint header") from exc
        if header.get("format") != FORMAT_NAME:
            raise CheckpointError(f"{path}: not a {FORMAT_NAME} file")
        if header.get("version") != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: unsupported checkpoint version {header.get('version')}"
            )
        arrays = {}
        for spec in header["arrays"]:
            dtype = np.dtype(spec["dtype"])
            shape = tuple(spec["shape"])
            count = int(np.prod(shape, dtype=np.int64))
            nbytes = dtype.itemsize * count
            buf = fh.read(nbytes)
            if len(buf) != nbytes:
                raise CheckpointError(f"{path}: truncated array {spec['name']!r}")
            arrays[spec["name"]] = np.frombuffer(buf, dtype=dtype, count=count).reshape(shape).copy()
    return arrays, header["meta"]
