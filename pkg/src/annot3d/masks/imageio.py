"""Binary PGM (P5) and PPM (P6) writers/readers with deterministic bytes."""

from __future__ import annotations

import numpy as np

from ..errors import InputFormatError


def write_pgm(bitmap: np.ndarray) -> bytes:
    """Boolean mask to 8-bit binary PGM (255 = set)."""
    bm = np.asarray(bitmap, dtype=bool)
    h, w = bm.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + (bm.astype(np.uint8) * 255).tobytes()


def write_ppm(rgb: np.ndarray) -> bytes:
    """(H, W, 3) uint8 image to binary PPM."""
    arr = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = arr.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + arr.tobytes()


def _read_header(data: bytes, magic: bytes, source: str):
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != magic:
        raise InputFormatError(f"not a {magic.decode()} file", source=source)
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise InputFormatError("only maxval 255 is supported", source=source)
    # payload starts right after the single whitespace byte following maxval
    header_len = data.index(parts[3], len(parts[0])) + len(parts[3]) + 1
    return w, h, data[header_len:]


def read_pgm(data: bytes, *, source: str = "pgm") -> np.ndarray:
    w, h, payload = _read_header(data, b"P5", source)
    if len(payload) < w * h:
        raise InputFormatError("truncated pixel payload", source=source)
    return np.frombuffer(payload[: w * h], dtype=np.uint8).reshape(h, w) > 127


def read_ppm(data: bytes, *, source: str = "ppm") -> np.ndarray:
    w, h, payload = _read_header(data, b"P6", source)
    if len(payload) < 3 * w * h:
        raise InputFormatError("truncated pixel payload", source=source)
    return np.frombuffer(payload[: 3 * w * h], dtype=np.uint8).reshape(h, w, 3).copy()
