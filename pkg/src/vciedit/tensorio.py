"""VCT1 tensor files.

Layout: ``b"VCT1"``, uint32 LE rank, rank x uint64 LE dims, then the
row-major float64 LE payload. Nothing may follow the payload.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import FormatError

MAGIC = b"VCT1"
_MAX_RANK = 32


def encode_tensor(x: np.ndarray) -> bytes:
    a = np.require(np.asarray(x, dtype="<f8"), requirements="C")
    head = MAGIC + struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    return head + a.tobytes(order="C")


def decode_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise FormatError("bad magic: not a VCT1 tensor")
    (rank,) = struct.unpack_from("<I", buf, 4)
    if rank > _MAX_RANK:
        raise FormatError(f"rank {rank} exceeds limit {_MAX_RANK}")
    off = 8 + 8 * rank
    if len(buf) < off:
        raise FormatError("truncated header")
    dims = struct.unpack_from(f"<{rank}Q", buf, 8)
    count = 1
    for d in dims:
        count *= d
    if count * 8 != len(buf) - off:
        raise FormatError(
            f"header declares {count} values but payload holds {(len(buf) - off) / 8:g}"
        )
    return np.frombuffer(buf, dtype="<f8", offset=off).astype(np.float64).reshape(dims)


def store_tensor(path: str | os.PathLike, x: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_tensor(x))


def load_tensor(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_tensor(fh.read())


def load_tensor_set(path: str | os.PathLike) -> np.ndarray:
    """Load a tensor file, or stack every ``*.vct`` file of a directory (sorted by name)."""
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.endswith(".vct"))
        if not names:
            raise FormatError(f"no .vct files in {path}")
        return np.stack([load_tensor(os.path.join(path, n)).reshape(-1) for n in names])
    return load_tensor(path)
