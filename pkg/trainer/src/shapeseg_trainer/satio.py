"""Reader for the toolkit's SAT1 tensor container.

Layout (little-endian): magic ``SAT1``, version u32 = 1, channels u32,
height u32, width u32, dtype u32 = 0 (float32), three u32
channel-semantics codes, then the planes channel-major, row-major. The
network consumes exactly 3 channels, so anything else is rejected here,
before any training or inference happens.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<4sIIIIIIII")
_MAGIC = b"SAT1"
_VERSION = 1
_DTYPE_F32 = 0


class SatFormatError(ValueError):
    """Raised for unreadable or unsupported SAT1 files."""


def read_header(path: str | Path) -> tuple[int, int, int]:
    """(channels, height, width) from the fixed-size header only.

    Cheap enough to run over a whole dataset up front, so malformed files
    fail the run before the first optimizer step.
    """
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise SatFormatError(f"{path}: truncated header")
    magic, version, channels, height, width, dtype, *_ = _HEADER.unpack(head)
    if magic != _MAGIC:
        raise SatFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise SatFormatError(f"{path}: unsupported version {version}")
    if dtype != _DTYPE_F32:
        raise SatFormatError(f"{path}: unsupported dtype code {dtype}")
    if channels != 3:
        raise SatFormatError(f"{path}: expected 3 channels, found {channels}")
    if height < 1 or width < 1:
        raise SatFormatError(f"{path}: zero-dimension tensor")
    return channels, height, width


def read_sat1(path: str | Path) -> np.ndarray:
    """Full tensor as a (3, height, width) float32 array."""
    channels, height, width = read_header(path)
    payload = Path(path).read_bytes()[_HEADER.size :]
    expected = channels * height * width * 4
    if len(payload) != expected:
        raise SatFormatError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected}"
        )
    planes = np.frombuffer(payload, dtype="<f4").reshape(channels, height, width)
    return np.ascontiguousarray(planes, dtype=np.float32)
