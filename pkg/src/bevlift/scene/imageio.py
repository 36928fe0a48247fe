"""RGB images as PNG (via Pillow) or binary PPM."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def _to_u8(rgb: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)


def write_png(path, rgb: np.ndarray) -> None:
    a = _to_u8(rgb)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(a[..., 0] if a.ndim == 3 and a.shape[-1] == 1 else a).save(path, format="PNG")


def write_ppm(path, rgb: np.ndarray) -> None:
    a = _to_u8(rgb)
    h, w = a.shape[:2]
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + a.tobytes())


def read_image(path) -> np.ndarray:
    """Float image in [0, 1] from PNG or PPM."""
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.float64) / 255.0
