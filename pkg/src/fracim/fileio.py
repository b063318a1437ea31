"""Binary containers: eigenbasis cache (DFEB), mask templates (CMSK), cubes (RCUB).

All headers are little-endian.  Layouts:

DFEB   ``"DFEB" | version u32 | n u32 | n*n float64 (row-major) | n int32``
CMSK   ``"CMSK" | n u32 | m u32 | count u32 | count packed m*n bit masks``
RCUB   ``"RCUB" | version u32 | n_fast u32 | n_ramps u32 | dtype u8 |
       payload float64 | meta_len u32 | meta (UTF-8 JSON)``

RCUB payloads are row-major ``n_fast x n_ramps``; complex payloads interleave
real and imaginary parts.
"""
import json
import os
import struct
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """A file does not match the expected container layout."""


DFEB_VERSION = 1
RCUB_VERSION = 1
DTYPE_REAL = 0
DTYPE_COMPLEX = 1

_DFEB_HEADER = struct.Struct("<4sII")
_CMSK_HEADER = struct.Struct("<4sIII")
_RCUB_HEADER = struct.Struct("<4sIIIB")
_U32 = struct.Struct("<I")


def cache_dir():
    """Directory for derived artefacts; override with ``FRACIM_CACHE_DIR``."""
    root = os.environ.get("FRACIM_CACHE_DIR")
    if root:
        return Path(root)
    return Path.home() / ".cache" / "fracim"


def _atomic_write(path, blob):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


# -- DFEB -------------------------------------------------------------------


def write_dfeb(path, v, eigen_index):
    v = np.asarray(v, dtype="<f8")
    n = v.shape[0]
    if v.shape != (n, n) or len(eigen_index) != n:
        raise ValueError("basis must be n x n with n eigen indices")
    blob = (
        _DFEB_HEADER.pack(b"DFEB", DFEB_VERSION, n)
        + np.ascontiguousarray(v).tobytes()
        + np.asarray(eigen_index, dtype="<i4").tobytes()
    )
    _atomic_write(path, blob)


def read_dfeb(path):
    blob = Path(path).read_bytes()
    if len(blob) < _DFEB_HEADER.size:
        raise FormatError("truncated DFEB header")
    magic, version, n = _DFEB_HEADER.unpack_from(blob)
    if magic != b"DFEB" or version != DFEB_VERSION:
        raise FormatError(f"not a DFEB v{DFEB_VERSION} file: {path}")
    expected = _DFEB_HEADER.size + 8 * n * n + 4 * n
    if len(blob) != expected:
        raise FormatError(f"DFEB size mismatch: {len(blob)} != {expected}")
    off = _DFEB_HEADER.size
    v = np.frombuffer(blob, dtype="<f8", count=n * n, offset=off).reshape(n, n)
    k = np.frombuffer(blob, dtype="<i4", count=n, offset=off + 8 * n * n)
    return v.astype(np.float64), k.astype(np.int64)


# -- CMSK -------------------------------------------------------------------


def write_cmsk(path, masks):
    """Store a ``count x m x n`` boolean stack, bit-packed per mask."""
    masks = np.asarray(masks, dtype=bool)
    count, m, n = masks.shape
    packed = np.packbits(masks.reshape(count, m * n), axis=1, bitorder="little")
    _atomic_write(path, _CMSK_HEADER.pack(b"CMSK", n, m, count) + packed.tobytes())


def read_cmsk(path):
    blob = Path(path).read_bytes()
    if len(blob) < _CMSK_HEADER.size:
        raise FormatError("truncated CMSK header")
    magic, n, m, count = _CMSK_HEADER.unpack_from(blob)
    if magic != b"CMSK":
        raise FormatError(f"not a CMSK file: {path}")
    row_bytes = (m * n + 7) // 8
    if len(blob) != _CMSK_HEADER.size + count * row_bytes:
        raise FormatError("CMSK size mismatch")
    packed = np.frombuffer(blob, dtype=np.uint8, offset=_CMSK_HEADER.size)
    packed = packed.reshape(count, row_bytes)
    bits = np.unpackbits(packed, axis=1, count=m * n, bitorder="little")
    return bits.reshape(count, m, n).astype(bool)


# -- RCUB -------------------------------------------------------------------


def write_rcub(path, data, meta=None):
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("cube payload must be 2-D (n_fast x n_ramps)")
    n_fast, n_ramps = data.shape
    if np.iscomplexobj(data):
        dtype = DTYPE_COMPLEX
        payload = np.ascontiguousarray(data, dtype="<c16").view("<f8")
    else:
        dtype = DTYPE_REAL
        payload = np.ascontiguousarray(data, dtype="<f8")
    meta_blob = json.dumps(meta or {}, sort_keys=True, separators=(",", ":")).encode()
    blob = (
        _RCUB_HEADER.pack(b"RCUB", RCUB_VERSION, n_fast, n_ramps, dtype)
        + payload.tobytes()
        + _U32.pack(len(meta_blob))
        + meta_blob
    )
    _atomic_write(path, blob)


def read_rcub(path):
    """Return ``(data, meta)`` from an RCUB file."""
    blob = Path(path).read_bytes()
    if len(blob) < _RCUB_HEADER.size:
        raise FormatError("truncated RCUB header")
    magic, version, n_fast, n_ramps, dtype = _RCUB_HEADER.unpack_from(blob)
    if magic != b"RCUB" or version != RCUB_VERSION:
        raise FormatError(f"not an RCUB v{RCUB_VERSION} file: {path}")
    if dtype not in (DTYPE_REAL, DTYPE_COMPLEX):
        raise FormatError(f"unknown RCUB dtype tag {dtype}")
    n_vals = n_fast * n_ramps * (2 if dtype == DTYPE_COMPLEX else 1)
    off = _RCUB_HEADER.size
    end = off + 8 * n_vals
    if len(blob) < end + _U32.size:
        raise FormatError("truncated RCUB payload")
    vals = np.frombuffer(blob, dtype="<f8", count=n_vals, offset=off)
    if dtype == DTYPE_COMPLEX:
        data = vals.view("<c16").astype(np.complex128)
    else:
        data = vals.astype(np.float64)
    (meta_len,) = _U32.unpack_from(blob, end)
    meta_raw = blob[end + _U32.size : end + _U32.size + meta_len]
    if len(meta_raw) != meta_len:
        raise FormatError("truncated RCUB metadata")
    return data.reshape(n_fast, n_ramps), json.loads(meta_raw.decode())
