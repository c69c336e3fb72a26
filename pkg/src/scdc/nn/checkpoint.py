"""Binary container of named float64 arrays.

Layout: the magic ``b"SCDC1"``, an unsigned 64-bit little-endian manifest
length, a UTF-8 JSON manifest, then the concatenated little-endian array
buffers. The manifest maps each name to ``{"shape", "offset"}`` (offset in
bytes from the start of the data section) and carries free-form metadata.
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SCDC1"


class CheckpointError(ValueError):
    pass


def dumps(arrays: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    entries, chunks, offset = {}, [], 0
    for name, arr in arrays.items():
        buf = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries[name] = {"shape": list(np.shape(arr)), "offset": offset}
        chunks.append(buf)
        offset += len(buf)
    manifest = json.dumps({"format": MAGIC.decode(), "arrays": entries,
                           "meta": meta or {}}, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(manifest)) + manifest + b"".join(chunks)


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if not blob.startswith(MAGIC):
        raise CheckpointError("not an SCDC1 checkpoint")
    head = len(MAGIC) + 8
    if len(blob) < head:
        raise CheckpointError("truncated checkpoint")
    (mlen,) = struct.unpack("<Q", blob[len(MAGIC):head])
    try:
        manifest = json.loads(blob[head:head + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"bad manifest: {exc}") from None
    data = memoryview(blob)[head + mlen:]
    arrays = {}
    for name, e in manifest["arrays"].items():
        count = int(np.prod(e["shape"], dtype=np.int64))
        end = e["offset"] + 8 * count
        if end > len(data):
            raise CheckpointError(f"array {name!r} runs past end of file")
        arrays[name] = np.frombuffer(data[e["offset"]:end], dtype="<f8").astype(
            np.float64).reshape(e["shape"])
    return arrays, manifest.get("meta", {})


def save(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(arrays, meta))
    os.replace(tmp, path)


def load(path) -> tuple[dict[str, np.ndarray], dict]:
    return loads(Path(path).read_bytes())
