"""Shared binary container helpers.

All model and dataset files in this package use the same little-endian
layout: an 8-byte ASCII magic, fixed u32/u8 header fields, then raw numpy
payloads. Readers validate the magic before touching the payload.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np


class ContainerError(ValueError):
    """Raised when a file does not match its expected container layout."""


def write_magic(fh: BinaryIO, magic: bytes) -> None:
    if len(magic) != 8:
        raise ValueError("magic must be exactly 8 bytes")
    fh.write(magic)


def expect_magic(fh: BinaryIO, magic: bytes) -> None:
    got = fh.read(8)
    if got != magic:
        raise ContainerError(f"expected magic {magic!r}, found {got!r}")


def peek_magic(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read(8)


def write_u8(fh: BinaryIO, value: int) -> None:
    fh.write(struct.pack("<B", value))


def read_u8(fh: BinaryIO) -> int:
    return struct.unpack("<B", _read_exact(fh, 1))[0]


def write_u32(fh: BinaryIO, value: int) -> None:
    fh.write(struct.pack("<I", value))


def read_u32(fh: BinaryIO) -> int:
    return struct.unpack("<I", _read_exact(fh, 4))[0]


def write_f64(fh: BinaryIO, value: float) -> None:
    fh.write(struct.pack("<d", value))


def read_f64(fh: BinaryIO) -> float:
    return struct.unpack("<d", _read_exact(fh, 8))[0]


def write_array(fh: BinaryIO, arr: np.ndarray, dtype: str = "<f4") -> None:
    fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def read_array(fh: BinaryIO, shape: tuple[int, ...], dtype: str = "<f4") -> np.ndarray:
    count = int(np.prod(shape)) if shape else 1
    nbytes = count * np.dtype(dtype).itemsize
    data = np.frombuffer(_read_exact(fh, nbytes), dtype=dtype)
    return data.reshape(shape).copy()


def _read_exact(fh: BinaryIO, nbytes: int) -> bytes:
    data = fh.read(nbytes)
    if len(data) != nbytes:
        raise ContainerError(f"truncated container: wanted {nbytes} bytes, got {len(data)}")
    return data
