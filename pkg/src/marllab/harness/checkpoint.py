"""Binary checkpoints: named float32 arrays, bit-exact round trips.

Layout: the tag ``MARLCKPT1`` followed by one record per array in name
order: u32-LE name length, UTF-8 name, u32-LE rank, u32-LE dims, then the
row-major float32-LE payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MARLCKPT1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(arrays: dict[str, np.ndarray], path: str | Path) -> None:
    chunks = [MAGIC]
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad format tag)")
    pos = len(MAGIC)
    out: dict[str, np.ndarray] = {}
    last = "<start>"
    while pos < len(blob):
        if pos + 4 > len(blob):
            raise CheckpointError(
                f"{path}: truncated header after array {last!r}")
        (name_len,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        if pos + name_len > len(blob):
            raise CheckpointError(
                f"{path}: truncated name after array {last!r}")
        name = blob[pos:pos + name_len].decode("utf-8")
        pos += name_len
        last = name
        if pos + 4 > len(blob):
            raise CheckpointError(f"{path}: truncated rank for array {name!r}")
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        if pos + 4 * rank > len(blob):
            raise CheckpointError(f"{path}: truncated dims for array {name!r}")
        dims = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        count = 1
        for d in dims:
            count *= d
        nbytes = 4 * count
        if pos + nbytes > len(blob):
            raise CheckpointError(
                f"{path}: truncated payload for array {name!r}")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=pos)
        pos += nbytes
        out[name] = arr.reshape(dims).copy()
    return out
