"""Binary PGM (P5, 8-bit) reading and writing for label and boundary maps."""

from __future__ import annotations

import numpy as np

from .errors import FormatError


def write_pgm(values: np.ndarray, path) -> None:
    a = np.asarray(values)
    if a.ndim != 2:
        raise FormatError(f"PGM payload must be 2-D, got shape {a.shape}")
    if a.dtype != np.uint8:
        if not np.issubdtype(a.dtype, np.integer):
            raise FormatError(f"PGM payload must be integer, got dtype {a.dtype}")
        if a.min() < 0 or a.max() > 255:
            raise FormatError("PGM payload values must be in [0, 255]")
        a = a.astype(np.uint8)
    h, w = a.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(a).tobytes())


def _read_header_tokens(buf: bytes):
    """Yield (token, end_offset) for the three header fields after the magic,
    skipping whitespace and '#' comment lines."""
    pos = 2  # past "P5"
    tokens = []
    while len(tokens) < 3:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(buf[start:pos])
    if pos >= len(buf):
        raise FormatError("truncated PGM header")
    pos += 1  # single whitespace byte after maxval
    return tokens, pos


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:2] != b"P5":
        raise FormatError(f"not a binary PGM (P5) file: magic {buf[:2]!r}")
    tokens, pos = _read_header_tokens(buf)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise FormatError(f"non-numeric PGM header field: {tokens}") from e
    if w < 1 or h < 1:
        raise FormatError(f"invalid PGM size {w}x{h}")
    if maxval != 255:
        raise FormatError(f"only 8-bit PGM supported, maxval {maxval}")
    need = w * h
    payload = buf[pos : pos + need]
    if len(payload) != need:
        raise FormatError(
            f"truncated PGM payload: expected {need} bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()
