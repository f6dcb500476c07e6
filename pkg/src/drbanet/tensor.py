"""Immutable NCHW float32 tensor plus the DRBT on-disk format.

DRBT layout (little endian):

    bytes 0..3    magic "DRBT"
    bytes 4..7    u32 version, currently 1
    bytes 8..11   u32 rank, must be 4
    bytes 12..27  four u32 dims (n, c, h, w)
    bytes 28..    n*c*h*w float32 values, C order

Format errors name the byte offset at which the violation was detected.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError, NumericError, ShapeError

DRBT_MAGIC = b"DRBT"
DRBT_VERSION = 1

_F32LE = np.dtype("<f4")


class Tensor:
    """A rank-4 (n, c, h, w) float32 array, immutable once constructed."""

    __slots__ = ("_data",)

    def __init__(self, data: np.ndarray, copy: bool = True):
        arr = np.array(data, dtype=np.float32, order="C", copy=copy)
        if arr.ndim != 4:
            raise ShapeError(f"tensor must be rank 4, got rank {arr.ndim}")
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # Internal fast path for freshly built arrays: freezes without copying.
        if arr.dtype != np.float32 or not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr, dtype=np.float32)
        return cls(arr, copy=False)

    @classmethod
    def zeros(cls, n: int, c: int, h: int, w: int) -> "Tensor":
        return cls._wrap(np.zeros((n, c, h, w), dtype=np.float32))

    @classmethod
    def full(cls, dims: tuple[int, int, int, int], value: float) -> "Tensor":
        return cls._wrap(np.full(dims, value, dtype=np.float32))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self._data.shape  # type: ignore[return-value]

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def c(self) -> int:
        return self._data.shape[1]

    @property
    def h(self) -> int:
        return self._data.shape[2]

    @property
    def w(self) -> int:
        return self._data.shape[3]

    def require_finite(self, context: str = "tensor") -> "Tensor":
        """Validation pass: raise NumericError if any value is NaN or infinite."""
        if not np.isfinite(self._data).all():
            raise NumericError(f"non-finite values in {context}")
        return self

    def tobytes(self) -> bytes:
        return self._data.astype(_F32LE, copy=False).tobytes()

    def __repr__(self) -> str:
        return f"Tensor(dims={self.dims})"


def write_tensor(t: Tensor, path) -> None:
    """Serialize a tensor to a DRBT file."""
    with open(path, "wb") as f:
        f.write(DRBT_MAGIC)
        f.write(struct.pack("<II", DRBT_VERSION, 4))
        f.write(struct.pack("<IIII", *t.dims))
        f.write(t.tobytes())


def _take(buf: bytes, offset: int, count: int, what: str) -> bytes:
    if offset + count > len(buf):
        raise FormatError(f"truncated DRBT file: {what} at byte {offset}")
    return buf[offset : offset + count]


def read_tensor(path) -> Tensor:
    """Parse a DRBT file, naming the byte offset of any format violation."""
    with open(path, "rb") as f:
        buf = f.read()
    magic = _take(buf, 0, 4, "magic")
    if magic != DRBT_MAGIC:
        raise FormatError(f"bad magic {magic!r} at byte 0, expected {DRBT_MAGIC!r}")
    (version,) = struct.unpack("<I", _take(buf, 4, 4, "version"))
    if version != DRBT_VERSION:
        raise FormatError(f"unsupported DRBT version {version} at byte 4")
    (rank,) = struct.unpack("<I", _take(buf, 8, 4, "rank"))
    if rank != 4:
        raise FormatError(f"DRBT rank must be 4, got {rank} at byte 8")
    dims = struct.unpack("<IIII", _take(buf, 12, 16, "dims"))
    count = 1
    for d in dims:
        count *= d
    payload = _take(buf, 28, 4 * count, "f32 payload")
    if len(buf) != 28 + 4 * count:
        raise FormatError(f"trailing bytes after payload at byte {28 + 4 * count}")
    arr = np.frombuffer(payload, dtype=_F32LE).reshape(dims).astype(np.float32)
    return Tensor._wrap(arr)
