"""Little-endian binary container used for model checkpoints.

Layout (all integers little-endian):
    magic           4 bytes
    format version  u32
    array count     u32
    per array:
        dtype code  u8   (1 = float32, 2 = float64)
        ndim        u8
        dims        u32 * ndim
        data        raw C-order little-endian bytes
    metadata length u64
    metadata        UTF-8 JSON
"""

import json
import struct

import numpy as np

from .errors import StorageError

_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR = {np.dtype("float32"): 1, np.dtype("float64"): 2}

FORMAT_VERSION = 1


def write_blocks(path, magic: bytes, arrays, meta: dict):
    """Write arrays plus a JSON metadata trailer to path."""
    if len(magic) != 4:
        raise ValueError("magic must be 4 bytes")
    try:
        with open(path, "wb") as fh:
            fh.write(magic)
            fh.write(struct.pack("<II", FORMAT_VERSION, len(arrays)))
            for arr in arrays:
                arr = np.ascontiguousarray(arr)
                code = _CODE_FOR[np.dtype(arr.dtype)]
                fh.write(struct.pack("<BB", code, arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())
            blob = json.dumps(meta, sort_keys=True).encode("utf-8")
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def read_blocks(path, magic: bytes):
    """Read back (arrays, meta) written by write_blocks. Validates the magic."""
    try:
        with open(path, "rb") as fh:
            got = fh.read(4)
            if got != magic:
                raise StorageError(f"{path}: bad magic {got!r}, expected {magic!r}")
            version, count = struct.unpack("<II", fh.read(8))
            if version != FORMAT_VERSION:
                raise StorageError(f"{path}: unsupported format version {version}")
            arrays = []
            for _ in range(count):
                code, ndim = struct.unpack("<BB", fh.read(2))
                shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
                dtype = _DTYPE_CODES[code]
                n = int(np.prod(shape)) if shape else 1
                data = fh.read(n * dtype.itemsize)
                arrays.append(np.frombuffer(data, dtype=dtype).reshape(shape).copy())
            (blob_len,) = struct.unpack("<Q", fh.read(8))
            meta = json.loads(fh.read(blob_len).decode("utf-8"))
            return arrays, meta
    except FileNotFoundError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
