"""Binary morphology on toroidal rasters.

Rasters wrap around at the borders so that every operation commutes with
translation; a texture built from these operations has no preferred position,
which is what makes its white rate independent of where a UV chart sits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SHAPES = ("ellipse", "square", "cross")
MIN_SIZE, MAX_SIZE = 10, 30


@dataclass(frozen=True)
class StructuringElement:
    shape: str
    size: int

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown element shape {self.shape!r}")
        if self.size < 1:
            raise ValueError("element size must be positive")

    @property
    def extent(self) -> int:
        """Odd side length actually used, so the element has a centre pixel."""
        return 2 * (self.size // 2) + 1

    def mask(self) -> np.ndarray:
        n = self.extent
        c = n // 2
        if self.shape == "square":
            return np.ones((n, n), dtype=bool)
        if self.shape == "cross":
            m = np.zeros((n, n), dtype=bool)
            m[c, :] = m[:, c] = True
            return m
        yy, xx = np.mgrid[:n, :n] - c
        r = n / 2.0
        return xx * xx + yy * yy <= r * r

    @staticmethod
    def random(rng: np.random.Generator, lo: int = MIN_SIZE, hi: int = MAX_SIZE) -> "StructuringElement":
        return StructuringElement(SHAPES[int(rng.integers(len(SHAPES)))], int(rng.integers(lo, hi + 1)))


def _kernel_spectrum(mask: np.ndarray, shape) -> np.ndarray:
    # element centred on the origin of the torus
    k = np.zeros(shape)
    n = mask.shape[0]
    c = n // 2
    ys, xs = np.nonzero(mask)
    k[(ys - c) % shape[0], (xs - c) % shape[1]] = 1.0
    return np.fft.rfft2(k)


def _hits(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """count[p] = #{b in B : x[p - b]}, circular."""
    spec = np.fft.rfft2(x.astype(np.float64)) * _kernel_spectrum(mask, x.shape)
    return np.fft.irfft2(spec, s=x.shape)


def _check(x: np.ndarray, mask: np.ndarray) -> None:
    if mask.shape[0] > x.shape[0] or mask.shape[1] > x.shape[1]:
        raise ValueError("structuring element larger than raster")


def dilate(x: np.ndarray, el: StructuringElement | np.ndarray) -> np.ndarray:
    """Minkowski sum: union of copies of ``x`` shifted by every offset in the element."""
    mask = el.mask() if isinstance(el, StructuringElement) else np.asarray(el, dtype=bool)
    _check(x, mask)
    if not x.any():
        return np.zeros_like(x, dtype=bool)
    return _hits(x, mask) > 0.5


def erode(x: np.ndarray, el: StructuringElement | np.ndarray) -> np.ndarray:
    """Minkowski difference: pixels whose element neighbourhood lies inside ``x``."""
    mask = el.mask() if isinstance(el, StructuringElement) else np.asarray(el, dtype=bool)
    _check(x, mask)
    reflected = mask[::-1, ::-1]
    return _hits(x, reflected) > mask.sum() - 0.5


def opening(x: np.ndarray, el) -> np.ndarray:
    return dilate(erode(x, el), el)


def closing(x: np.ndarray, el) -> np.ndarray:
    return erode(dilate(x, el), el)


def toroidal_distance(x: np.ndarray) -> np.ndarray:
    """Euclidean distance from every pixel to the nearest white pixel, on the torus."""
    from scipy.ndimage import distance_transform_edt
    if not x.any():
        return np.full(x.shape, np.inf)
    h, w = x.shape
    tiled = np.tile(~x.astype(bool), (3, 3))
    d = distance_transform_edt(tiled)
    return d[h:2 * h, w:2 * w]
