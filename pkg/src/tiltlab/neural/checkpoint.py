"""Checkpoint files: one JSON header line, then a raw float32 payload.

The header carries the format version, a free-form config dict (encoder
architecture, vocabulary size, objective), a tensor directory with name,
dtype, shape and byte offset per entry, and a SHA-256 checksum over the
payload. Tensors are stored little-endian in name order.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from ..errors import CheckpointError

FORMAT_VERSION = 1
PAYLOAD_DTYPE = "<f4"


def save_checkpoint(path, state: dict[str, np.ndarray], config: dict) -> None:
    names = sorted(state)
    chunks = []
    directory = []
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(state[name])
        if arr.dtype != np.float32:
            raise CheckpointError(
                f"checkpoint payload is float32 only; {name} has {arr.dtype}"
            )
        raw = arr.astype(PAYLOAD_DTYPE).tobytes()
        directory.append({
            "name": name,
            "dtype": PAYLOAD_DTYPE,
            "shape": list(arr.shape),
            "offset": offset,
        })
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {
        "format_version": FORMAT_VERSION,
        "config": config,
        "tensors": directory,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "payload_bytes": len(payload),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns (state, config). Raises CheckpointError on any corruption."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {version} unsupported "
            f"(expected {FORMAT_VERSION})"
        )
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError(
            f"payload truncated: {len(payload)} bytes, "
            f"header says {header['payload_bytes']}"
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header["payload_sha256"]:
        raise CheckpointError("payload checksum mismatch")
    state: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        stop = start + count * 4
        if stop > len(payload):
            raise CheckpointError(f"tensor {entry['name']} overruns the payload")
        arr = np.frombuffer(payload[start:stop], dtype=entry["dtype"]).copy()
        try:
            state[entry["name"]] = arr.reshape(shape)
        except ValueError as exc:
            raise CheckpointError(
                f"tensor {entry['name']} shape {shape} does not match payload"
            ) from exc
    return state, header["config"]
