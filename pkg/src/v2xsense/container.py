"""Shared binary container layout.

Every on-disk artifact (dataset, sensing matrix, model weights) uses the same
envelope: 4 magic bytes, u32 little-endian version, u32 little-endian header
length, a UTF-8 JSON header, then a raw payload. Header JSON is serialized
with sorted keys and no whitespace so files are byte-deterministic.
"""
from __future__ import annotations

import json
import struct
from typing import BinaryIO

from .errors import ContainerError

_FIXED = struct.Struct("<II")  # version, header byte length


def encode_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_envelope(fh: BinaryIO, magic: bytes, version: int, header: dict) -> None:
    if len(magic) != 4:
        raise ValueError("magic must be 4 bytes")
    blob = encode_header(header)
    fh.write(magic)
    fh.write(_FIXED.pack(version, len(blob)))
    fh.write(blob)


def read_envelope(fh: BinaryIO, magic: bytes) -> tuple[int, dict]:
    """Read and validate magic/version/header; leaves fh at the payload start."""
    got = fh.read(4)
    if got != magic:
        raise ContainerError(f"bad magic: expected {magic!r}, got {got!r}")
    fixed = fh.read(_FIXED.size)
    if len(fixed) != _FIXED.size:
        raise ContainerError("truncated container: missing version/header length")
    version, hlen = _FIXED.unpack(fixed)
    blob = fh.read(hlen)
    if len(blob) != hlen:
        raise ContainerError(f"truncated header: expected {hlen} bytes, got {len(blob)}")
    try:
        header = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"unparseable header JSON: {exc}") from exc
    return version, header


def read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ContainerError(f"truncated {what}: expected {n} bytes, got {len(data)}")
    return data
