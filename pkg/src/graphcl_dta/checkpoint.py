"""Binary checkpoint format.

Layout::

    b"GCLDTACK"            8-byte magic
    uint16 LE              format version
    uint64 LE              manifest length in bytes
    manifest               UTF-8 JSON: {"meta": {...}, "arrays": [{"name", "shape", "dtype"}, ...]}
    raw arrays             little-endian, C order, in manifest order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"GCLDTACK"
VERSION = 1
_DTYPES = {"f8": "<f8", "f4": "<f4", "i8": "<i8"}


class CheckpointError(ValueError):
    pass


def _code(arr: np.ndarray) -> str:
    for code, dt in _DTYPES.items():
        if arr.dtype == np.dtype(dt):
            return code
    raise CheckpointError(f"unsupported array dtype {arr.dtype}")


def save_arrays(path, arrays: Mapping[str, np.ndarray], meta: dict | None = None) -> None:
    arrays = {k: np.asarray(v, order="C") for k, v in arrays.items()}
    manifest = {
        "meta": meta or {},
        "arrays": [{"name": k, "shape": list(v.shape), "dtype": _code(v)} for k, v in arrays.items()],
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HQ", VERSION, len(blob)))
        fh.write(blob)
        for entry in manifest["arrays"]:
            fh.write(arrays[entry["name"]].astype(_DTYPES[entry["dtype"]], copy=False).tobytes())
    tmp.replace(path)


def load_arrays(path, expected: Mapping[str, tuple[tuple[int, ...], str]] | None = None):
    """Read a checkpoint; returns ``(arrays, meta)``.

    ``expected`` maps array names to ``(shape, dtype code)``; any mismatch, or a
    missing expected array, raises :class:`CheckpointError`.
    """
    try:
        with open(path, "rb") as fh:
            if fh.read(len(MAGIC)) != MAGIC:
                raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
            version, mlen = struct.unpack("<HQ", fh.read(10))
            if version != VERSION:
                raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
            manifest = json.loads(fh.read(mlen).decode("utf-8"))
            arrays = {}
            for entry in manifest["arrays"]:
                dt = np.dtype(_DTYPES[entry["dtype"]])
                count = int(np.prod(entry["shape"], dtype=np.int64))
                buf = fh.read(count * dt.itemsize)
                if len(buf) != count * dt.itemsize:
                    raise CheckpointError(f"{path}: truncated data for {entry['name']}")
                arrays[entry["name"]] = np.frombuffer(buf, dtype=dt).reshape(entry["shape"]).astype(dt.newbyteorder("="))
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read ({exc.strerror})") from None
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: corrupt manifest ({exc})") from None
    if expected is not None:
        for name, (shape, code) in expected.items():
            if name not in arrays:
                raise CheckpointError(f"{path}: missing array {name}")
            got = arrays[name]
            if tuple(got.shape) != tuple(shape) or _code(got) != code:
                raise CheckpointError(
                    f"{path}: {name} is {tuple(got.shape)}/{_code(got)}, expected {tuple(shape)}/{code}"
                )
    return arrays, manifest["meta"]
