"""Self-describing binary checkpoint container.

Layout (all integers little-endian):

    magic   8 bytes  b"NERCKPT1" (format version baked into the tag)
    u32     length of the UTF-8 JSON configuration block
    bytes   configuration block
    u32     number of arrays
    per array:
        u32      name length, then UTF-8 name
        u32      ndim, then ndim * u64 dims
        float64  raw little-endian values, C order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"NERCKPT1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Malformed or truncated checkpoint file."""


def save_checkpoint(path: str | Path, arrays: Mapping[str, np.ndarray], config: dict) -> None:
    """Write named float64 arrays plus the config block that produced them."""
    blob = json.dumps(
        {"format_version": FORMAT_VERSION, "config": config}, sort_keys=True
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            a = np.ascontiguousarray(arr, dtype=np.float64)
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
            fh.write(a.astype("<f8", copy=False).tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict, int]:
    """Read a checkpoint; returns (arrays, config, format_version).

    Rejects unknown magic and non-finite values: checkpoints are external
    input.
    """
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    off = len(MAGIC)

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(raw):
            raise CheckpointError(f"{path}: truncated checkpoint")
        chunk = raw[off : off + n]
        off += n
        return chunk

    (blob_len,) = struct.unpack("<I", take(4))
    header = json.loads(take(blob_len).decode("utf-8"))
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version!r}")
    (count,) = struct.unpack("<I", take(4))
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim)) if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"{path}: non-finite values in array {name!r}")
        arrays[name] = arr
    return arrays, header["config"], version
