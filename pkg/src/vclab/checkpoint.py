"""Model checkpoint container ("VCRM" files).

Layout, all integers little-endian:

    magic    4 bytes  b"VCRM"
    version  u32      currently 1
    meta     u32 count, then per entry:
                 u32 key length, key (UTF-8), u32 value length, value (UTF-8)
    params   u32 count, then per entry:
                 u32 name length, name (UTF-8)
                 u8 dtype tag (0 = float64, 1 = float32)
                 u32 ndim, u32 * ndim extents
                 raw little-endian float payload

Round trips are bit-exact: load(save(x)) returns identical arrays and
save(load(path)) reproduces the file byte for byte.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"VCRM"
VERSION = 1

_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_DTYPE_TAGS = {np.dtype("float64"): 0, np.dtype("float32"): 1}


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path: str | Path, meta: dict[str, str],
                    params: dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    blob += struct.pack("<I", len(meta))
    for k, v in meta.items():
        blob += _packed_str(str(k)) + _packed_str(str(v))
    blob += struct.pack("<I", len(params))
    for name, arr in params.items():
        arr = np.asarray(arr)
        if arr.dtype not in _DTYPE_TAGS:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for {name!r}")
        blob += _packed_str(name)
        blob += struct.pack("<B", _DTYPE_TAGS[arr.dtype])
        blob += struct.pack("<I", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: str | Path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a VCRM checkpoint (bad magic)")
    off = 4
    version, off = _u32(blob, off)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported VCRM version {version}")
    n_meta, off = _u32(blob, off)
    meta: dict[str, str] = {}
    for _ in range(n_meta):
        k, off = _str(blob, off)
        v, off = _str(blob, off)
        meta[k] = v
    n_params, off = _u32(blob, off)
    params: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        name, off = _str(blob, off)
        tag = blob[off]
        off += 1
        if tag not in _DTYPES:
            raise CheckpointError(f"{path}: unknown dtype tag {tag}")
        ndim, off = _u32(blob, off)
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        dt = _DTYPES[tag]
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype=dt, count=count, offset=off).reshape(shape)
        off += count * dt.itemsize
        params[name] = arr.copy()
    if off != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - off} trailing bytes")
    return meta, params


def _packed_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def _u32(blob: bytes, off: int) -> tuple[int, int]:
    return struct.unpack_from("<I", blob, off)[0], off + 4


def _str(blob: bytes, off: int) -> tuple[str, int]:
    n, off = _u32(blob, off)
    return blob[off:off + n].decode("utf-8"), off + n
