"""Length-prefixed framed records for the on-disk snapshot and journal.

One frame = 4-byte big-endian payload length, the payload bytes, then a
4-byte big-endian CRC32 of the payload. Payloads are self-describing JSON
documents encoded with sorted keys and compact separators so byte layout is
deterministic (see docs/persistence.md; frozen by golden-file tests).
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

_LEN = struct.Struct(">I")

SNAPSHOT_FILE = "snapshot.v1"
JOURNAL_FILE = "journal.v1"


def encode_doc(doc: object) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_doc(payload: bytes) -> object:
    return json.loads(payload.decode("utf-8"))


def encode_frame(payload: bytes) -> bytes:
    return _LEN.pack(len(payload)) + payload + _LEN.pack(zlib.crc32(payload))


def write_frame(f, payload: bytes) -> None:
    f.write(encode_frame(payload))


@dataclass
class FrameScan:
    """Result of reading a frame sequence defensively."""

    payloads: list[bytes]
    valid_bytes: int  # offset just past the last intact frame
    error: str | None  # why scanning stopped early, None if file was clean


def scan_frames(data: bytes) -> FrameScan:
    """Decode frames until the data ends or a frame fails its integrity check
    (truncated length/payload/CRC or checksum mismatch)."""
    payloads: list[bytes] = []
    pos = 0
    n = len(data)
    while pos < n:
        if pos + 4 > n:
            return FrameScan(payloads, pos, "truncated frame header")
        (length,) = _LEN.unpack_from(data, pos)
        end = pos + 4 + length + 4
        if end > n:
            return FrameScan(payloads, pos, "truncated frame body")
        payload = data[pos + 4 : pos + 4 + length]
        (crc,) = _LEN.unpack_from(data, pos + 4 + length)
        if zlib.crc32(payload) != crc:
            return FrameScan(payloads, pos, "frame checksum mismatch")
        payloads.append(payload)
        pos = end
    return FrameScan(payloads, pos, None)


def read_frames(path: Path) -> FrameScan:
    if not path.exists():
        return FrameScan([], 0, None)
    return scan_frames(path.read_bytes())


def write_file_atomic(path: Path, data: bytes) -> None:
    """Write via a temp file + rename so readers never see a partial file."""
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
    _fsync_dir(path.parent)


def _fsync_dir(directory: Path) -> None:
    fd = os.open(directory, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)
