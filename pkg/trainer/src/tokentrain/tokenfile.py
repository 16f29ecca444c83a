"""Reader/writer for the binary face-token format.

Layout: 4-byte magic "BRTK", u32 version, u32 face count, u32 token dim
(16-byte header), then an int64 face-id table and a float32 row-major
token matrix, all little-endian. Implemented here independently so the
harness depends only on the documented format, not on the producer.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"BRTK"
VERSION = 1


def read_token_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (face_ids int64 (F,), tokens float32 (F, D))."""
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise ValueError(f"{path}: truncated header ({len(data)} bytes)")
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}")
    version, count, dim = struct.unpack("<III", data[4:16])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    want = 16 + 8 * count + 4 * count * dim
    if len(data) != want:
        raise ValueError(f"{path}: length {len(data)} != expected {want}")
    ids = np.frombuffer(data, dtype="<i8", count=count, offset=16).copy()
    tokens = np.frombuffer(data, dtype="<f4", count=count * dim,
                           offset=16 + 8 * count).reshape(count, dim).copy()
    return ids, tokens


def write_token_file(path, face_ids, tokens) -> None:
    tokens = np.ascontiguousarray(tokens, dtype="<f4")
    ids = np.ascontiguousarray(face_ids, dtype="<i8")
    if tokens.ndim != 2 or len(ids) != tokens.shape[0]:
        raise ValueError(f"{len(ids)} ids vs token matrix {tokens.shape}")
    head = MAGIC + struct.pack("<III", VERSION, *tokens.shape)
    Path(path).write_bytes(head + ids.tobytes() + tokens.tobytes())
