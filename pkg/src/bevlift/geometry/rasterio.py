"""Depth, BEV and mask rasters on disk: PGM (8/16 bit) and raw float64."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def write_pgm(path, img: np.ndarray, scale: float = 1.0, bits: int = 16) -> None:
    """Store ``round(img * scale)`` clipped to the bit depth; non-finite becomes 0."""
    maxval = (1 << bits) - 1
    a = np.where(np.isfinite(img), img, 0.0) * scale
    q = np.clip(np.rint(a), 0, maxval).astype(">u2" if bits == 16 else np.uint8)
    h, w = q.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode() + q.tobytes())


def read_pgm(path, scale: float = 1.0) -> np.ndarray:
    buf = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            pos = buf.index(b"\n", pos) + 1
            continue
        end = pos
        while not buf[end:end + 1].isspace():
            end += 1
        fields.append(buf[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    pos += 1
    dt = ">u2" if maxval > 255 else np.uint8
    q = np.frombuffer(buf, dtype=dt, count=w * h, offset=pos).reshape(h, w)
    return q.astype(np.float64) / scale


def write_mask(path, mask: np.ndarray) -> None:
    write_pgm(path, mask.astype(np.float64), scale=255.0, bits=8)


def read_mask(path) -> np.ndarray:
    return read_pgm(path) > 127


def write_raw(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(np.asarray(arr, dtype="<f8").tobytes())


def read_raw(path, shape) -> np.ndarray:
    return np.fromfile(path, dtype="<f8").reshape(shape).astype(np.float64)
