"""Binary weight container.

Layout, all integers little-endian::

    magic   4 bytes  b"HVIW"
    version u32      1
    count   u32      number of tensor records
    then per record:
        name_len u32, name (utf-8, name_len bytes)
        dtype    u8   0 = float32, 1 = float64
        rank     u32, extents u64 * rank
        data     raw little-endian values, row-major
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"HVIW"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAGS = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class WeightFileError(ValueError):
    pass


def dumps_tensors(tensors: dict) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype not in _TAGS:
            raise WeightFileError(f"unsupported dtype {arr.dtype} for {name!r}")
        tag = _TAGS[arr.dtype]
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack("<BI", tag, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes())
    return b"".join(parts)


def loads_tensors(buf: bytes) -> dict:
    if buf[:4] != MAGIC:
        raise WeightFileError("not a weight file (bad magic)")
    pos = 4
    try:
        version, count = struct.unpack_from("<II", buf, pos)
        pos += 8
        if version != VERSION:
            raise WeightFileError(f"unsupported weight file version {version}")
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            name = buf[pos : pos + nlen].decode("utf-8")
            pos += nlen
            tag, rank = struct.unpack_from("<BI", buf, pos)
            pos += 5
            shape = struct.unpack_from(f"<{rank}Q", buf, pos)
            pos += 8 * rank
            dtype = _DTYPES[tag]
            nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if pos + nbytes > len(buf):
                raise WeightFileError(f"truncated data for {name!r}")
            out[name] = np.frombuffer(buf, dtype=dtype, count=nbytes // dtype.itemsize, offset=pos).reshape(shape).astype(dtype.newbyteorder("="))
            pos += nbytes
    except (struct.error, KeyError, UnicodeDecodeError) as exc:
        raise WeightFileError(f"corrupt weight file: {exc}") from exc
    if pos != len(buf):
        raise WeightFileError(f"{len(buf) - pos} trailing bytes after the last tensor")
    return out


def save_tensors(path, tensors: dict):
    with open(path, "wb") as fh:
        fh.write(dumps_tensors(tensors))


def load_tensors(path) -> dict:
    with open(path, "rb") as fh:
        return loads_tensors(fh.read())
